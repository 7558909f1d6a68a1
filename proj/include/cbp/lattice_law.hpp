#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cbp/errors.hpp"
#include "cbp/rng.hpp"

namespace cbp {

// Parametric variants of a probability law on the non-negative integers.
struct Dirac {
    std::int64_t value = 0;
};
struct Bernoulli {
    double p = 0.5;
};
struct Binomial {
    std::int64_t n = 1;
    double p = 0.5;
};
struct Poisson {
    double rate = 1.0;
};
// Counts failures before the first success: P(Y = i) = p (1-p)^i.
struct Geometric {
    double p = 0.5;
};
// Counts failures before the r-th success; r may be any positive real.
struct NegBinomial {
    double r = 1.0;
    double p = 0.5;
};
struct Explicit {
    std::vector<double> pmf; // indexed from 0
};

namespace detail {

constexpr std::int64_t kMaxState = std::int64_t{1} << 62;

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    if (a > kMaxState - b) throw NumericError("integer state overflow in addition");
    return a + b;
}

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    if (a != 0 && b > kMaxState / a) throw NumericError("integer state overflow in multiplication");
    return a * b;
}

// Inversion starting from pmf(0); ratio(i) = pmf(i+1)/pmf(i).
template <typename Ratio>
std::int64_t inversion_from_zero(double f0, Ratio ratio, std::int64_t support_max, double u) {
    double f = f0;
    double acc = f;
    std::int64_t i = 0;
    while (u >= acc && i < support_max) {
        f *= ratio(i);
        ++i;
        acc += f;
        if (f <= 0.0) break; // pmf underflow: residual mass below double resolution
    }
    return i;
}

// Inversion scanning outward from the mode; O(sd) expected steps.
template <typename RatioUp, typename RatioDown>
std::int64_t mode_scan(std::int64_t mode, double log_pmf_mode, RatioUp up, RatioDown down,
                       std::int64_t support_max, double u) {
    const double fm = std::exp(log_pmf_mode);
    double acc = fm;
    if (u < acc) return mode;
    double fl = fm, fr = fm;
    std::int64_t lo = mode, hi = mode;
    while (lo > 0 || hi < support_max) {
        if (hi < support_max) {
            fr *= up(hi);
            ++hi;
            acc += fr;
            if (u < acc) return hi;
        }
        if (lo > 0) {
            fl *= down(lo);
            --lo;
            acc += fl;
            if (u < acc) return lo;
        }
        if (fl <= 0.0 && fr <= 0.0) break;
    }
    return hi; // float shortfall in the far tail
}

inline std::int64_t poisson_sample(double rate, RngStream& rng) {
    if (rate <= 0.0) return 0;
    const double u = rng.next_unit();
    if (rate < 30.0) {
        return inversion_from_zero(std::exp(-rate), [rate](std::int64_t i) { return rate / double(i + 1); },
                                   kMaxState, u);
    }
    const auto mode = static_cast<std::int64_t>(std::floor(rate));
    const double logfm = -rate + double(mode) * std::log(rate) - std::lgamma(double(mode) + 1.0);
    return mode_scan(
        mode, logfm, [rate](std::int64_t i) { return rate / double(i + 1); },
        [rate](std::int64_t i) { return double(i) / rate; }, kMaxState, u);
}

inline std::int64_t binomial_sample(std::int64_t n, double p, RngStream& rng) {
    if (n <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    if (p > 0.5) return n - binomial_sample(n, 1.0 - p, rng);
    const double u = rng.next_unit();
    const double q = 1.0 - p, odds = p / q;
    if (double(n) * p < 30.0) {
        const double f0 = std::exp(double(n) * std::log1p(-p));
        return inversion_from_zero(
            f0, [n, odds](std::int64_t i) { return double(n - i) / double(i + 1) * odds; }, n, u);
    }
    auto mode = static_cast<std::int64_t>(std::floor(double(n + 1) * p));
    mode = std::clamp<std::int64_t>(mode, 0, n);
    const double logfm = std::lgamma(double(n) + 1.0) - std::lgamma(double(mode) + 1.0) -
                         std::lgamma(double(n - mode) + 1.0) + double(mode) * std::log(p) +
                         double(n - mode) * std::log1p(-p);
    return mode_scan(
        mode, logfm, [n, odds](std::int64_t i) { return double(n - i) / double(i + 1) * odds; },
        [n, odds](std::int64_t i) { return double(i) / (double(n - i + 1) * odds); }, n, u);
}

inline std::int64_t geometric_sample(double p, RngStream& rng) {
    if (p >= 1.0) return 0;
    const double u = rng.next_unit_open();
    const double v = std::floor(std::log(u) / std::log1p(-p));
    if (!(v < double(kMaxState))) throw NumericError("geometric draw overflow");
    return v <= 0.0 ? 0 : static_cast<std::int64_t>(v);
}

inline std::int64_t negbin_sample(double r, double p, RngStream& rng) {
    if (p >= 1.0) return 0;
    const double q = 1.0 - p;
    const double mean = r * q / p;
    const double u = rng.next_unit();
    if (mean < 30.0) {
        const double f0 = std::exp(r * std::log(p));
        if (f0 > 0.0) {
            return inversion_from_zero(
                f0, [r, q](std::int64_t i) { return (r + double(i)) / double(i + 1) * q; }, kMaxState, u);
        }
    }
    const auto mode = r > 1.0 ? static_cast<std::int64_t>(std::floor((r - 1.0) * q / p)) : std::int64_t{0};
    const double logfm = std::lgamma(r + double(mode)) - std::lgamma(r) - std::lgamma(double(mode) + 1.0) +
                         r * std::log(p) + double(mode) * std::log(q);
    return mode_scan(
        mode, logfm, [r, q](std::int64_t i) { return (r + double(i)) / double(i + 1) * q; },
        [r, q](std::int64_t i) { return double(i) / ((r + double(i) - 1.0) * q); }, kMaxState, u);
}

} // namespace detail

/// A probability law on N_0 with exact PGF algebra, factorial moments,
/// materialization to a finite pmf, and reproducible sampling.
///
/// Values are immutable and freely shareable across threads.
class LatticeLaw {
public:
    using Variant = std::variant<Dirac, Bernoulli, Binomial, Poisson, Geometric, NegBinomial, Explicit>;

    LatticeLaw(Dirac d) : v_(d) {
        if (d.value < 0) throw ValidationError("Dirac value must be non-negative");
    }
    LatticeLaw(Bernoulli b) : v_(b) {
        if (!(b.p >= 0.0 && b.p <= 1.0)) throw ValidationError("Bernoulli p must lie in [0,1]");
    }
    LatticeLaw(Binomial b) : v_(b) {
        if (b.n < 1) throw ValidationError("Binomial n must be a positive integer");
        if (!(b.p >= 0.0 && b.p <= 1.0)) throw ValidationError("Binomial p must lie in [0,1]");
    }
    LatticeLaw(Poisson p) : v_(p) {
        if (!(p.rate >= 0.0) || !std::isfinite(p.rate)) throw ValidationError("Poisson rate must be >= 0");
    }
    LatticeLaw(Geometric g) : v_(g) {
        if (!(g.p > 0.0 && g.p <= 1.0)) throw ValidationError("Geometric p must lie in (0,1]");
    }
    LatticeLaw(NegBinomial nb) : v_(nb) {
        if (!(nb.r > 0.0) || !std::isfinite(nb.r)) throw ValidationError("NegBinomial r must be > 0");
        if (!(nb.p > 0.0 && nb.p <= 1.0)) throw ValidationError("NegBinomial p must lie in (0,1]");
    }
    LatticeLaw(Explicit e) : v_(std::move(e)) {
        const auto& pmf = std::get<Explicit>(v_).pmf;
        if (pmf.empty()) throw ValidationError("Explicit pmf must be non-empty");
        double sum = 0.0;
        for (double q : pmf) {
            if (!(q >= 0.0)) throw ValidationError("Explicit pmf entries must be >= 0");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-10)
            throw ValidationError("Explicit pmf must sum to 1 within 1e-10 (got " + std::to_string(sum) + ")");
    }

    /// Internal constructor for truncated pmfs produced by materialization and
    /// convolution. A small mass deficit (<= 1e-8) is tolerated and tracked.
    static LatticeLaw truncated(std::vector<double> pmf) {
        double sum = 0.0;
        for (double q : pmf) {
            if (!(q >= 0.0)) throw ValidationError("pmf entries must be >= 0");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-8)
            throw ValidationError("truncated pmf mass deficit exceeds 1e-8 (sum " + std::to_string(sum) + ")");
        LatticeLaw law{Explicit{std::move(pmf)}, Unchecked{}};
        return law;
    }

    const Variant& dist() const { return v_; }

    bool is_explicit() const { return std::holds_alternative<Explicit>(v_); }
    const std::vector<double>& explicit_pmf() const { return std::get<Explicit>(v_).pmf; }

    /// E[s^Y] for s in [0,1]; closed forms for parametric variants, Horner for
    /// Explicit. pgf(1) == 1 exactly.
    double pgf(double s) const { return pgf_derivative(s, 0); }

    /// d^order/ds^order of the PGF at s in [0,1]; order in {0,1,2}.
    double pgf_derivative(double s, int order) const {
        if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("PGF argument must lie in [0,1]");
        if (order < 0 || order > 2) throw ValidationError("PGF derivative order must be 0, 1 or 2");
        if (order == 0 && s == 1.0) return 1.0;
        return std::visit([&](const auto& d) { return eval_derivative(d, s, order); }, v_);
    }

    /// Left derivative of the PGF at 1 of the given order (1 = mean,
    /// 2 = E[Y(Y-1)]), computed analytically. +infinity would signal a
    /// divergent moment; every supported variant has finite moments on its
    /// parameter domain.
    double factorial_moment(int order) const {
        if (order != 1 && order != 2) throw ValidationError("factorial moment order must be 1 or 2");
        return std::visit([&](const auto& d) { return fact_moment(d, order); }, v_);
    }

    double mean() const { return factorial_moment(1); }

    /// One reproducible draw.
    std::int64_t sample(RngStream& rng) const {
        return std::visit([&](const auto& d) { return draw(d, rng); }, v_);
    }

    /// Finite pmf: parametric laws are cut once the cumulative mass exceeds
    /// 1 - 1e-12, never past index max_support. The deficit is tracked by the
    /// resulting law; callers needing tighter tails must check total_mass().
    LatticeLaw materialized(std::size_t max_support = 1u << 20) const {
        if (is_explicit()) {
            const auto& pmf = explicit_pmf();
            if (pmf.size() <= max_support + 1) return *this;
            std::vector<double> cut(pmf.begin(), pmf.begin() + static_cast<std::ptrdiff_t>(max_support + 1));
            return truncated(std::move(cut));
        }
        std::vector<double> pmf = std::visit([&](const auto& d) { return walk_pmf(d, max_support); }, v_);
        return truncated(std::move(pmf));
    }

    /// Sum of the stored pmf for Explicit laws, exactly 1 for parametric ones.
    double total_mass() const {
        if (!is_explicit()) return 1.0;
        double sum = 0.0;
        for (double q : explicit_pmf()) sum += q;
        return sum;
    }

private:
    struct Unchecked {};
    LatticeLaw(Explicit e, Unchecked) : v_(std::move(e)) {}

    // --- PGF and derivatives -------------------------------------------------
    static double eval_derivative(const Dirac& d, double s, int order) {
        const double n = double(d.value);
        switch (order) {
        case 0: return d.value == 0 ? 1.0 : std::pow(s, n);
        case 1: return d.value >= 1 ? n * std::pow(s, n - 1.0) : 0.0;
        default: return d.value >= 2 ? n * (n - 1.0) * std::pow(s, n - 2.0) : 0.0;
        }
    }
    static double eval_derivative(const Bernoulli& b, double s, int order) {
        switch (order) {
        case 0: return 1.0 - b.p + b.p * s;
        case 1: return b.p;
        default: return 0.0;
        }
    }
    static double eval_derivative(const Binomial& b, double s, int order) {
        const double base = 1.0 - b.p + b.p * s;
        const double n = double(b.n);
        switch (order) {
        case 0: return std::pow(base, n);
        case 1: return n * b.p * std::pow(base, n - 1.0);
        default: return b.n >= 2 ? n * (n - 1.0) * b.p * b.p * std::pow(base, n - 2.0) : 0.0;
        }
    }
    static double eval_derivative(const Poisson& p, double s, int order) {
        const double e = std::exp(p.rate * (s - 1.0));
        double c = 1.0;
        for (int i = 0; i < order; ++i) c *= p.rate;
        return c * e;
    }
    static double eval_derivative(const Geometric& g, double s, int order) {
        const double q = 1.0 - g.p, den = 1.0 - q * s;
        switch (order) {
        case 0: return g.p / den;
        case 1: return g.p * q / (den * den);
        default: return 2.0 * g.p * q * q / (den * den * den);
        }
    }
    static double eval_derivative(const NegBinomial& nb, double s, int order) {
        const double q = 1.0 - nb.p, den = 1.0 - q * s;
        const double pr = std::pow(nb.p, nb.r);
        switch (order) {
        case 0: return pr * std::pow(den, -nb.r);
        case 1: return nb.r * q * pr * std::pow(den, -nb.r - 1.0);
        default: return nb.r * (nb.r + 1.0) * q * q * pr * std::pow(den, -nb.r - 2.0);
        }
    }
    static double eval_derivative(const Explicit& e, double s, int order) {
        // Horner on the derivative coefficients
        const auto& pmf = e.pmf;
        const auto n = static_cast<std::ptrdiff_t>(pmf.size());
        double acc = 0.0;
        for (std::ptrdiff_t i = n - 1; i >= order; --i) {
            double coeff = pmf[static_cast<std::size_t>(i)];
            for (int t = 0; t < order; ++t) coeff *= double(i - t);
            acc = acc * s + coeff;
        }
        return acc;
    }

    // --- factorial moments ---------------------------------------------------
    static double fact_moment(const Dirac& d, int order) {
        return order == 1 ? double(d.value) : double(d.value) * double(d.value - 1);
    }
    static double fact_moment(const Bernoulli& b, int order) { return order == 1 ? b.p : 0.0; }
    static double fact_moment(const Binomial& b, int order) {
        return order == 1 ? double(b.n) * b.p : double(b.n) * double(b.n - 1) * b.p * b.p;
    }
    static double fact_moment(const Poisson& p, int order) {
        return order == 1 ? p.rate : p.rate * p.rate;
    }
    static double fact_moment(const Geometric& g, int order) {
        const double q = 1.0 - g.p;
        return order == 1 ? q / g.p : 2.0 * q * q / (g.p * g.p);
    }
    static double fact_moment(const NegBinomial& nb, int order) {
        const double q = 1.0 - nb.p;
        return order == 1 ? nb.r * q / nb.p : nb.r * (nb.r + 1.0) * q * q / (nb.p * nb.p);
    }
    static double fact_moment(const Explicit& e, int order) {
        double acc = 0.0;
        for (std::size_t i = 0; i < e.pmf.size(); ++i) {
            const double x = double(i);
            acc += (order == 1 ? x : x * (x - 1.0)) * e.pmf[i];
        }
        return acc;
    }

    // --- sampling ------------------------------------------------------------
    static std::int64_t draw(const Dirac& d, RngStream&) { return d.value; }
    static std::int64_t draw(const Bernoulli& b, RngStream& rng) {
        return rng.next_unit() < b.p ? 1 : 0;
    }
    static std::int64_t draw(const Binomial& b, RngStream& rng) {
        return detail::binomial_sample(b.n, b.p, rng);
    }
    static std::int64_t draw(const Poisson& p, RngStream& rng) {
        return detail::poisson_sample(p.rate, rng);
    }
    static std::int64_t draw(const Geometric& g, RngStream& rng) {
        return detail::geometric_sample(g.p, rng);
    }
    static std::int64_t draw(const NegBinomial& nb, RngStream& rng) {
        return detail::negbin_sample(nb.r, nb.p, rng);
    }
    static std::int64_t draw(const Explicit& e, RngStream& rng) {
        const double u = rng.next_unit();
        double acc = 0.0;
        for (std::size_t i = 0; i < e.pmf.size(); ++i) {
            acc += e.pmf[i];
            if (u < acc) return static_cast<std::int64_t>(i);
        }
        return static_cast<std::int64_t>(e.pmf.size()) - 1;
    }

    // --- materialization -----------------------------------------------------
    template <typename Ratio>
    static std::vector<double> walk_recurrence(double f0, Ratio ratio, std::int64_t support_max,
                                               std::size_t cap) {
        std::vector<double> pmf;
        double f = f0, cum = f0;
        pmf.push_back(f);
        std::int64_t i = 0;
        while (cum < 1.0 - 1e-12 && i < support_max && pmf.size() <= cap) {
            f *= ratio(i);
            ++i;
            pmf.push_back(f);
            cum += f;
            if (f == 0.0) break;
        }
        return pmf;
    }
    static std::vector<double> walk_pmf(const Dirac& d, std::size_t cap) {
        if (static_cast<std::size_t>(d.value) > cap)
            throw ValidationError("Dirac atom beyond truncation bound");
        std::vector<double> pmf(static_cast<std::size_t>(d.value) + 1, 0.0);
        pmf.back() = 1.0;
        return pmf;
    }
    static std::vector<double> walk_pmf(const Bernoulli& b, std::size_t) {
        return {1.0 - b.p, b.p};
    }
    static std::vector<double> walk_pmf(const Binomial& b, std::size_t cap) {
        if (b.p <= 0.0) return {1.0};
        if (b.p >= 1.0) return walk_pmf(Dirac{b.n}, cap);
        const double odds = b.p / (1.0 - b.p);
        const std::int64_t n = b.n;
        return walk_recurrence(std::exp(double(n) * std::log1p(-b.p)),
                               [n, odds](std::int64_t i) { return double(n - i) / double(i + 1) * odds; },
                               n, cap);
    }
    static std::vector<double> walk_pmf(const Poisson& p, std::size_t cap) {
        if (p.rate == 0.0) return {1.0};
        const double rate = p.rate;
        return walk_recurrence(std::exp(-rate),
                               [rate](std::int64_t i) { return rate / double(i + 1); },
                               detail::kMaxState, cap);
    }
    static std::vector<double> walk_pmf(const Geometric& g, std::size_t cap) {
        const double q = 1.0 - g.p;
        return walk_recurrence(g.p, [q](std::int64_t) { return q; }, detail::kMaxState, cap);
    }
    static std::vector<double> walk_pmf(const NegBinomial& nb, std::size_t cap) {
        const double q = 1.0 - nb.p, r = nb.r;
        return walk_recurrence(std::exp(r * std::log(nb.p)),
                               [r, q](std::int64_t i) { return (r + double(i)) / double(i + 1) * q; },
                               detail::kMaxState, cap);
    }
    static std::vector<double> walk_pmf(const Explicit& e, std::size_t) { return e.pmf; }

    Variant v_;
};

namespace detail {

inline std::vector<double> convolve_pmf(const std::vector<double>& a, const std::vector<double>& b,
                                        std::size_t cap) {
    const std::size_t n = std::min(a.size() + b.size() - 1, cap + 1);
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        const std::size_t jmax = std::min(b.size(), n - std::min(i, n));
        for (std::size_t j = 0; j < jmax; ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

} // namespace detail

/// Exact pmf (up to truncation) of the sum of j independent copies of `law`.
/// j = 0 yields the null law. Truncation caps the support at index
/// `truncation`; a tail mass beyond 1e-9, before or after convolving, is an
/// error rather than a silent renormalization.
inline LatticeLaw convolve_power(const LatticeLaw& law, std::int64_t j, std::size_t truncation = 4096) {
    if (j < 0) throw ValidationError("convolution power must be non-negative");
    if (j == 0) return LatticeLaw(Dirac{0});
    LatticeLaw base = law.materialized(truncation);
    if (1.0 - base.total_mass() > 1e-9)
        throw ValidationError("truncation insufficient: base law tail mass exceeds 1e-9");
    if (j == 1) return base;
    std::vector<double> result{1.0};
    std::vector<double> power = base.explicit_pmf();
    std::int64_t e = j;
    while (e > 0) {
        if (e & 1) result = detail::convolve_pmf(result, power, truncation);
        e >>= 1;
        if (e > 0) power = detail::convolve_pmf(power, power, truncation);
    }
    double sum = 0.0;
    for (double q : result) sum += q;
    if (1.0 - sum > 1e-9)
        throw ValidationError("truncation insufficient: convolved tail mass exceeds 1e-9");
    return LatticeLaw::truncated(std::move(result));
}

/// The law of the sum of `count` IID copies when that sum is again parametric.
inline std::optional<LatticeLaw> iid_sum_law(const LatticeLaw& law, std::int64_t count) {
    if (count == 0) return LatticeLaw(Dirac{0});
    if (const auto* d = std::get_if<Dirac>(&law.dist()))
        return LatticeLaw(Dirac{detail::checked_mul(d->value, count)});
    if (const auto* b = std::get_if<Bernoulli>(&law.dist())) return LatticeLaw(Binomial{count, b->p});
    if (const auto* b = std::get_if<Binomial>(&law.dist()))
        return LatticeLaw(Binomial{detail::checked_mul(b->n, count), b->p});
    if (const auto* p = std::get_if<Poisson>(&law.dist()))
        return LatticeLaw(Poisson{p->rate * double(count)});
    if (const auto* g = std::get_if<Geometric>(&law.dist()))
        return LatticeLaw(NegBinomial{double(count), g->p});
    if (const auto* nb = std::get_if<NegBinomial>(&law.dist()))
        return LatticeLaw(NegBinomial{nb->r * double(count), nb->p});
    return std::nullopt;
}

/// One draw of the sum of `count` IID copies of `law`.
///
/// With `allow_aggregate` the parametric closure (iid_sum_law) or, for
/// Explicit laws, an exact multinomial count decomposition replaces the
/// count-fold loop. Both routes sample the same distribution; equality is
/// property-tested. Dirac laws short-circuit either way (no randomness).
inline std::int64_t sample_iid_sum(const LatticeLaw& law, std::int64_t count, RngStream& rng,
                                   bool allow_aggregate = true) {
    if (count < 0) throw ValidationError("IID sum count must be non-negative");
    if (count == 0) return 0;
    if (const auto* d = std::get_if<Dirac>(&law.dist())) return detail::checked_mul(d->value, count);
    if (allow_aggregate) {
        if (auto agg = iid_sum_law(law, count)) return agg->sample(rng);
        if (law.is_explicit()) {
            const auto& pmf = law.explicit_pmf();
            std::int64_t remaining = count;
            double mass = law.total_mass();
            std::int64_t sum = 0;
            for (std::size_t i = 0; i + 1 < pmf.size() && remaining > 0; ++i) {
                const double pi = mass > 0.0 ? std::min(1.0, pmf[i] / mass) : 1.0;
                const std::int64_t ni = detail::binomial_sample(remaining, pi, rng);
                sum = detail::checked_add(sum, detail::checked_mul(static_cast<std::int64_t>(i), ni));
                remaining -= ni;
                mass -= pmf[i];
            }
            if (remaining > 0)
                sum = detail::checked_add(
                    sum, detail::checked_mul(static_cast<std::int64_t>(pmf.size()) - 1, remaining));
            return sum;
        }
    }
    std::int64_t sum = 0;
    for (std::int64_t i = 0; i < count; ++i) sum = detail::checked_add(sum, law.sample(rng));
    return sum;
}

} // namespace cbp
