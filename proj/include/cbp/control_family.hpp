#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <utility>

#include "cbp/lattice_law.hpp"

namespace cbp {

/// Control distributions split into a size-divisible part and an immigration
/// part: for population size j the number of parents is the sum of j IID
/// draws from root_law(k, j) plus one independent draw from
/// immigration_law(k, j). The j = 0 divisible part is identically null.
///
/// Immutable after construction; law lookups are memoized behind a lock, and
/// j-homogeneous families can bypass the cache entirely.
class ControlFamily {
public:
    using LawFn = std::function<LatticeLaw(std::int64_t k, std::int64_t j)>;
    struct Limits {
        double rho0 = 0.0;
        double sigma0 = 0.0;
    };

    ControlFamily(LawFn root, LawFn immigration, std::optional<Limits> declared = std::nullopt,
                  bool aggregate_fast_path = false)
        : impl_(std::make_shared<Impl>()) {
        if (!root || !immigration) throw ValidationError("ControlFamily requires both law maps");
        impl_->root = std::move(root);
        impl_->imm = std::move(immigration);
        impl_->limits = declared;
        impl_->fast = aggregate_fast_path;
    }

    /// Disables law memoization. Worth it when the law maps are cheap
    /// closed-form constructions: per-step cache locking otherwise dominates
    /// parallel simulation.
    ControlFamily& set_memoize(bool on) {
        impl_->memoize = on;
        return *this;
    }

    /// Marks the root (and/or immigration) law as independent of j, which
    /// removes cache traffic from per-step sampling.
    ControlFamily& set_uniform_root(LatticeLaw law) {
        impl_->uniform_root = std::move(law);
        return *this;
    }
    ControlFamily& set_uniform_immigration(LatticeLaw law) {
        impl_->uniform_imm = std::move(law);
        return *this;
    }

    /// Law with PGF f_k^(j); Dirac(0) for j = 0 by the 0-divisibility convention.
    LatticeLaw root_law(std::int64_t k, std::int64_t j) const {
        if (j == 0) return LatticeLaw(Dirac{0});
        if (impl_->uniform_root) return *impl_->uniform_root;
        return cached(impl_->root_cache, impl_->root, k, j);
    }

    /// Law with PGF h_k^(j).
    LatticeLaw immigration_law(std::int64_t k, std::int64_t j) const {
        if (impl_->uniform_imm) return *impl_->uniform_imm;
        return cached(impl_->imm_cache, impl_->imm, k, j);
    }

    std::optional<Limits> declared_limits() const { return impl_->limits; }
    bool aggregate_fast_path() const { return impl_->fast; }

private:
    struct Impl {
        LawFn root, imm;
        std::optional<Limits> limits;
        bool fast = false;
        bool memoize = true;
        std::optional<LatticeLaw> uniform_root, uniform_imm;
        mutable std::shared_mutex mu;
        mutable std::map<std::pair<std::int64_t, std::int64_t>, LatticeLaw> root_cache, imm_cache;
    };

    LatticeLaw cached(std::map<std::pair<std::int64_t, std::int64_t>, LatticeLaw>& cache,
                      const LawFn& fn, std::int64_t k, std::int64_t j) const {
        if (k < 1) throw ValidationError("scaling index k must be positive");
        if (j < 0) throw ValidationError("population size j must be non-negative");
        if (!impl_->memoize) return fn(k, j);
        {
            std::shared_lock<std::shared_mutex> lock(impl_->mu);
            auto it = cache.find({k, j});
            if (it != cache.end()) return it->second;
        }
        LatticeLaw law = fn(k, j);
        std::unique_lock<std::shared_mutex> lock(impl_->mu);
        cache.emplace(std::make_pair(k, j), law);
        return law;
    }

    std::shared_ptr<Impl> impl_;
};

/// Control PGF c_k^(j)(s) = [f_k^(j)(s)]^j * h_k^(j)(s); c_k^(0) = h_k^(0).
inline double control_pgf(const ControlFamily& family, std::int64_t k, std::int64_t j, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("PGF argument must lie in [0,1]");
    const double h = family.immigration_law(k, j).pgf(s);
    if (j == 0) return h;
    const double f = family.root_law(k, j).pgf(s);
    return std::pow(f, double(j)) * h;
}

struct ControlDraw {
    std::int64_t divisible = 0;
    std::int64_t immigration = 0;
    std::int64_t total = 0;
};

/// One control draw at population size j: the divisible part is a sum of j
/// root draws (one aggregate draw on the opt-in fast path), the immigration
/// part a single draw. The two parts use independent substreams split off
/// `rng`, so neither part's consumption pattern perturbs the other.
inline ControlDraw sample_control(const ControlFamily& family, std::int64_t k, std::int64_t j,
                                  RngStream& rng) {
    RngStream div_rng = rng.split();
    RngStream imm_rng = rng.split();
    ControlDraw out;
    if (j > 0) {
        out.divisible =
            sample_iid_sum(family.root_law(k, j), j, div_rng, family.aggregate_fast_path());
    }
    out.immigration = family.immigration_law(k, j).sample(imm_rng);
    out.total = detail::checked_add(out.divisible, out.immigration);
    return out;
}

} // namespace cbp
