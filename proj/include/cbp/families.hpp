#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cbp/control_family.hpp"

namespace cbp {

/// Time-scaling sequence gamma_k together with its declared limit of gamma_k/k.
struct ScalingRule {
    std::function<double(std::int64_t)> gamma;
    double gamma0 = 0.0;
};

/// gamma_k = c k (gamma0 = c).
inline ScalingRule linear_scaling(double c = 1.0) {
    if (!(c > 0.0)) throw ValidationError("scaling constant must be positive");
    return {[c](std::int64_t k) { return c * double(k); }, c};
}

/// gamma_k = c k^p with p < 1 (gamma0 = 0).
inline ScalingRule power_scaling(double c, double p) {
    if (!(c > 0.0)) throw ValidationError("scaling constant must be positive");
    if (!(p > 0.0 && p < 1.0)) throw ValidationError("scaling exponent must lie in (0,1)");
    return {[c, p](std::int64_t k) { return c * std::pow(double(k), p); }, 0.0};
}

/// Immigration map options for the ready-made families. The default pairs
/// every family with Poisson(beta k / gamma_k), whose H_k limit is the
/// constant-alpha mechanism H(x, lambda) = beta lambda.
struct FamilyOptions {
    double beta = 1.0;
    ControlFamily::LawFn immigration; // overrides the default when set
};

namespace detail {

inline ControlFamily::LawFn default_immigration(double beta, const ScalingRule& rule) {
    auto gamma = rule.gamma;
    return [beta, gamma](std::int64_t k, std::int64_t) {
        return LatticeLaw(Poisson{beta * double(k) / gamma(k)});
    };
}

} // namespace detail

/// Deterministic control: the divisible part is exactly j (root Dirac(1)).
/// Satisfies the moment limits with rho0 = sigma0 = 0 when m = 1.
inline ControlFamily identity_control_family(double m, const ScalingRule& rule,
                                             FamilyOptions options = {}) {
    auto imm = options.immigration ? options.immigration
                                   : detail::default_immigration(options.beta, rule);
    std::optional<ControlFamily::Limits> limits;
    if (std::abs(m - 1.0) < 1e-12) limits = ControlFamily::Limits{0.0, 0.0};
    ControlFamily family([](std::int64_t, std::int64_t) { return LatticeLaw(Dirac{1}); },
                         std::move(imm), limits, /*aggregate_fast_path=*/true);
    family.set_uniform_root(LatticeLaw(Dirac{1}));
    family.set_memoize(false);
    return family;
}

/// Poisson control, worked instance: the j-divisible part is
/// Poisson(r_k(j) j) with r_k(j) = (1/m)(1 - 2/k + 1/(j k log k)), so the
/// j-th root is Poisson(r_k(j)). Declared limits rho0 = 2 gamma0,
/// sigma0 = 1/m^2. Needs k >= 2.
inline ControlFamily poisson_control_family(double m, const ScalingRule& rule,
                                            FamilyOptions options = {}) {
    if (!(m > 0.0)) throw ValidationError("m must be positive");
    auto imm = options.immigration ? options.immigration
                                   : detail::default_immigration(options.beta, rule);
    auto root = [m](std::int64_t k, std::int64_t j) {
        if (k < 2) throw ValidationError("Poisson control instance needs k >= 2");
        const double rate =
            (1.0 / m) * (1.0 - 2.0 / double(k) + 1.0 / (double(j) * double(k) * std::log(double(k))));
        return LatticeLaw(Poisson{std::max(rate, 0.0)});
    };
    ControlFamily family(std::move(root), std::move(imm),
                         ControlFamily::Limits{2.0 * rule.gamma0, 1.0 / (m * m)},
                         /*aggregate_fast_path=*/true);
    family.set_memoize(false);
    return family;
}

/// Binomial control: the divisible part is Binomial(N_k(j) j, p_k(j)) with
/// root Binomial(N_k(j), p_k(j)). Declared sigma0 = (1/m)(1/m - p0) with p0
/// the declared limit of p_k(j).
inline ControlFamily binomial_control_family(std::function<std::int64_t(std::int64_t, std::int64_t)> N,
                                             std::function<double(std::int64_t, std::int64_t)> p,
                                             double m, double rho0, double p0,
                                             const ScalingRule& rule, FamilyOptions options = {}) {
    if (!(m > 0.0)) throw ValidationError("m must be positive");
    auto imm = options.immigration ? options.immigration
                                   : detail::default_immigration(options.beta, rule);
    auto root = [N, p](std::int64_t k, std::int64_t j) {
        const double pj = p(k, j);
        if (!(pj >= 0.0 && pj <= 1.0))
            throw ValidationError("binomial control: p_k(j) must lie in [0,1]");
        return LatticeLaw(Binomial{N(k, j), pj});
    };
    ControlFamily family(std::move(root), std::move(imm),
                         ControlFamily::Limits{rho0, (1.0 / m) * (1.0 / m - p0)},
                         /*aggregate_fast_path=*/true);
    family.set_memoize(false);
    return family;
}

/// Binomial worked instance: N_k(j) = 1 + j k (k+1), p_k(j) = 1/(m j k^2);
/// rho0 = -gamma0, p0 = 0.
inline ControlFamily binomial_control_family_instance(double m, const ScalingRule& rule,
                                                      FamilyOptions options = {}) {
    auto N = [](std::int64_t k, std::int64_t j) {
        return detail::checked_add(std::int64_t{1},
                                   detail::checked_mul(j, detail::checked_mul(k, k + 1)));
    };
    auto p = [m](std::int64_t k, std::int64_t j) {
        return 1.0 / (m * double(j) * double(k) * double(k));
    };
    return binomial_control_family(N, p, m, -rule.gamma0, 0.0, rule, std::move(options));
}

/// Negative binomial control: the divisible part is
/// NegBinomial(N_k(j) j, p_k(j)) with root NegBinomial(N_k(j), p_k(j)).
/// Declared sigma0 = (1/m)(1/m + q0) with q0 the declared limit of
/// (1 - p_k(j)) / p_k(j).
inline ControlFamily negbin_control_family(std::function<double(std::int64_t, std::int64_t)> N,
                                           std::function<double(std::int64_t, std::int64_t)> p,
                                           double m, double rho0, double q0, const ScalingRule& rule,
                                           FamilyOptions options = {}) {
    if (!(m > 0.0)) throw ValidationError("m must be positive");
    auto imm = options.immigration ? options.immigration
                                   : detail::default_immigration(options.beta, rule);
    auto root = [N, p](std::int64_t k, std::int64_t j) {
        const double pj = p(k, j);
        if (!(pj > 0.0 && pj <= 1.0))
            throw ValidationError("negative binomial control: p_k(j) must lie in (0,1]");
        return LatticeLaw(NegBinomial{N(k, j), pj});
    };
    ControlFamily family(std::move(root), std::move(imm),
                         ControlFamily::Limits{rho0, (1.0 / m) * (1.0 / m + q0)},
                         /*aggregate_fast_path=*/true);
    family.set_memoize(false);
    return family;
}

/// Geometric worked instance: N_k(j) = 1,
/// p_k(j) = m e^{(j+k)^{-2}} / (1 + m e^{(j+k)^{-2}}); rho0 = 0, q0 = 1/m.
inline ControlFamily negbin_control_family_instance(double m, const ScalingRule& rule,
                                                    FamilyOptions options = {}) {
    auto N = [](std::int64_t, std::int64_t) { return 1.0; };
    auto p = [m](std::int64_t k, std::int64_t j) {
        const double s = double(j + k);
        const double e = m * std::exp(1.0 / (s * s));
        return e / (1.0 + e);
    };
    return negbin_control_family(N, p, m, 0.0, 1.0 / m, rule, std::move(options));
}

// ---------------------------------------------------------------------------
// Numeric verifiers for the standing hypotheses
// ---------------------------------------------------------------------------

struct MomentLimitRow {
    std::int64_t k = 0;
    double gamma_k = 0.0;
    double dev1 = 0.0; // sup_j | gamma_k [1 - m f'(1-)] - rho0 |
    double dev2 = 0.0; // sup_j | f''(1-) - sigma0 |
};

struct MomentLimitReport {
    std::vector<MomentLimitRow> rows;
    bool dev1_non_increasing = true;
    bool dev2_non_increasing = true;
    std::int64_t j_max = 0;
    std::string mode; // "grid" or "grid+tail", plus a non-monotone flag
};

/// Uniform-in-j moment limits of the root laws, checked on the grid
/// {1, ..., j_max}. When the deviation is monotone along the grid a large-j
/// probe (j = 10^8) is folded in as the finite surrogate for the analytic
/// tail; non-monotone grids are flagged since the finite sup may then
/// under-report. Requires declared limits.
inline MomentLimitReport verify_root_moment_limits(const ControlFamily& family, double m,
                                                   const ScalingRule& rule,
                                                   std::span<const std::int64_t> k_list,
                                                   std::int64_t j_max = 10000) {
    auto limits = family.declared_limits();
    if (!limits) throw ValidationError("verify_root_moment_limits needs declared (rho0, sigma0)");
    if (j_max < 1) throw ValidationError("j_max must be positive");
    MomentLimitReport report;
    report.j_max = j_max;
    bool monotone_everywhere = true;
    for (std::int64_t k : k_list) {
        MomentLimitRow row;
        row.k = k;
        row.gamma_k = rule.gamma(k);
        // monotone in either direction justifies probing the j -> infinity tail
        bool d1_up = true, d1_down = true, d2_up = true, d2_down = true;
        double prev1 = -1.0, prev2 = -1.0;
        for (std::int64_t j = 1; j <= j_max; ++j) {
            const LatticeLaw root = family.root_law(k, j);
            const double d1 = std::abs(row.gamma_k * (1.0 - m * root.factorial_moment(1)) - limits->rho0);
            const double d2 = std::abs(root.factorial_moment(2) - limits->sigma0);
            if (prev1 >= 0.0) {
                if (d1 > prev1 + 1e-15) d1_down = false;
                if (d1 < prev1 - 1e-15) d1_up = false;
            }
            if (prev2 >= 0.0) {
                if (d2 > prev2 + 1e-15) d2_down = false;
                if (d2 < prev2 - 1e-15) d2_up = false;
            }
            prev1 = d1;
            prev2 = d2;
            row.dev1 = std::max(row.dev1, d1);
            row.dev2 = std::max(row.dev2, d2);
        }
        if ((d1_up || d1_down) && (d2_up || d2_down)) {
            const std::int64_t j_tail = 100000000;
            const LatticeLaw root = family.root_law(k, j_tail);
            row.dev1 = std::max(
                row.dev1, std::abs(row.gamma_k * (1.0 - m * root.factorial_moment(1)) - limits->rho0));
            row.dev2 = std::max(row.dev2, std::abs(root.factorial_moment(2) - limits->sigma0));
        } else {
            monotone_everywhere = false;
        }
        report.rows.push_back(row);
    }
    report.mode = monotone_everywhere
                      ? "grid{1.." + std::to_string(j_max) + "}+tail(j=1e8)"
                      : "grid{1.." + std::to_string(j_max) + "} (non-monotone in j; sup may be low)";
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
        if (report.rows[i].dev1 > report.rows[i - 1].dev1 + 1e-15)
            report.dev1_non_increasing = false;
        if (report.rows[i].dev2 > report.rows[i - 1].dev2 + 1e-15)
            report.dev2_non_increasing = false;
    }
    return report;
}

struct GrowthReport {
    double K1_hat = 0.0; // smallest constant with (gamma_k/k) h'(1-) <= K1 (1+x) on the grid
};

/// Estimates the immigration-mean growth constant on an x grid:
/// K1_hat = max over the grid of (gamma_k/k) * mean(h_k^(floor(kx))) / (1+x).
inline GrowthReport estimate_immigration_growth(const ControlFamily& family, std::int64_t k,
                                                double gamma_k, std::span<const double> x_grid) {
    GrowthReport report;
    for (double x : x_grid) {
        if (!(x >= 0.0)) throw ValidationError("x grid must be non-negative");
        const auto j = static_cast<std::int64_t>(std::floor(double(k) * x + 1e-12));
        const double lhs = gamma_k / double(k) * family.immigration_law(k, j).mean();
        report.K1_hat = std::max(report.K1_hat, lhs / (1.0 + x));
    }
    return report;
}

} // namespace cbp
