#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cbp/cbp_process.hpp"

namespace cbp {

struct MeasureAtom {
    double u = 1.0;      // jump size, > 0
    double weight = 1.0; // atom mass, > 0
};

/// Data of the limiting continuous-state branching process with dependent
/// immigration: branching triple (a, b, mu), immigration triple (alpha, nu, r),
/// the scaling constants (m, gamma0, rho0, sigma0), and the linear-growth
/// constant K. Measures are finite atom lists; continuous measures must be
/// pre-discretized by the caller (infinite activity is rejected by design).
struct LimitParams {
    double a = 0.0;
    double b = 0.0;
    std::vector<MeasureAtom> mu_atoms{};
    std::function<double(double)> alpha = [](double) { return 0.0; };
    std::optional<double> alpha_const = 0.0; // set when alpha is a constant
    std::vector<MeasureAtom> nu_atoms{};
    std::function<double(double, double)> r = [](double, double) { return 0.0; };
    double m = 1.0;
    double gamma0 = 0.0;
    double rho0 = 0.0;
    double sigma0 = 0.0;
    double K = 0.0;  // linear growth constant; <= 0 requests estimation
    double K1 = 0.0; // immigration-mean growth constant (informational)

    /// Checks atom positivity and the linear growth condition
    /// alpha(x) + sum r(x,u) u w <= K (1+x) on a grid over [0, x_max];
    /// estimates K from the grid when unset.
    LimitParams& validate(double x_max = 20.0, int grid_points = 201) {
        if (!(b >= 0.0)) throw ValidationError("LimitParams: b must be non-negative");
        if (!(m > 0.0)) throw ValidationError("LimitParams: m must be positive");
        if (!(gamma0 >= 0.0)) throw ValidationError("LimitParams: gamma0 must be non-negative");
        if (!(sigma0 >= 0.0)) throw ValidationError("LimitParams: sigma0 must be non-negative");
        for (const auto& atom : mu_atoms)
            if (!(atom.u > 0.0) || !(atom.weight > 0.0))
                throw ValidationError("LimitParams: mu atoms must have positive size and weight");
        for (const auto& atom : nu_atoms)
            if (!(atom.u > 0.0) || !(atom.weight > 0.0))
                throw ValidationError("LimitParams: nu atoms must have positive size and weight");
        double needed = 0.0;
        for (int i = 0; i < grid_points; ++i) {
            const double x = x_max * double(i) / double(grid_points - 1);
            const double lhs = linear_growth_lhs(x);
            if (K > 0.0 && lhs > K * (1.0 + x) + 1e-9)
                throw InvariantError("LimitParams: linear growth bound fails at x = " + std::to_string(x));
            needed = std::max(needed, lhs / (1.0 + x));
        }
        if (K <= 0.0) K = needed * (1.0 + 1e-9);
        return *this;
    }

    double linear_growth_lhs(double x) const {
        double lhs = alpha(x);
        for (const auto& atom : nu_atoms) lhs += r(x, atom.u) * atom.u * atom.weight;
        return lhs;
    }
};

/// Branching mechanism G(l) = a l + b^2 l^2 / 2 + sum w (e^{-l u} - 1 + l u).
inline double branching_mechanism(const LimitParams& params, double lambda) {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
    double g = params.a * lambda + 0.5 * params.b * params.b * lambda * lambda;
    for (const auto& atom : params.mu_atoms)
        g += atom.weight * (std::expm1(-lambda * atom.u) + lambda * atom.u);
    return g;
}

/// Immigration mechanism H(x,l) = alpha(x) l + sum w (1 - e^{-l u}) r(x,u).
/// The proof bound 0 <= H <= K l (1+x) is enforced at every evaluation.
inline double immigration_mechanism(const LimitParams& params, double x, double lambda) {
    if (!(x >= 0.0) || !(lambda >= 0.0))
        throw ValidationError("immigration mechanism arguments must be non-negative");
    double h = params.alpha(x) * lambda;
    for (const auto& atom : params.nu_atoms)
        h += atom.weight * (-std::expm1(-lambda * atom.u)) * params.r(x, atom.u);
    if (h < -1e-12 || (params.K > 0.0 && h > params.K * lambda * (1.0 + x) * (1.0 + 1e-9) + 1e-12))
        throw InvariantError("immigration mechanism violates 0 <= H <= K lambda (1+x)");
    return h;
}

/// G_k(l) = (k gamma_k / m) [ g_k(1 - l/k) - (1 - m l / k) ], l in [0, k].
inline double branching_mechanism_k(const ScaledModel& model, double lambda) {
    const double k = double(model.k);
    if (!(lambda >= 0.0 && lambda <= k))
        throw ValidationError("branching_mechanism_k: lambda must lie in [0, k]");
    const double g = model.offspring.pgf(1.0 - lambda / k);
    return k * model.gamma_k / model.m * (g - (1.0 - model.m * lambda / k));
}

/// S_k(l) = (k gamma_k / m) [ g_k(e^{-l/k}) - (1 - m l / k) ], l >= 0.
inline double branching_mechanism_exp_k(const ScaledModel& model, double lambda) {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
    const double k = double(model.k);
    const double g = model.offspring.pgf(std::exp(-lambda / k));
    return k * model.gamma_k / model.m * (g - (1.0 - model.m * lambda / k));
}

/// T_k(l) = k [ 1 - g_k(e^{-l/k}) ], l >= 0.
inline double offspring_cumulant_k(const ScaledModel& model, double lambda) {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
    const double k = double(model.k);
    return k * (1.0 - model.offspring.pgf(std::exp(-lambda / k)));
}

/// H_k(x,l) = gamma_k [ 1 - h_k^(floor(kx))(1 - l/k) ], l in [0, k].
inline double immigration_mechanism_k(const ControlFamily& family, std::int64_t k, double gamma_k,
                                      double x, double lambda) {
    if (!(lambda >= 0.0 && lambda <= double(k)))
        throw ValidationError("immigration_mechanism_k: lambda must lie in [0, k]");
    if (!(x >= 0.0)) throw ValidationError("x must be non-negative");
    const auto j = static_cast<std::int64_t>(std::floor(double(k) * x + 1e-12));
    const double h = family.immigration_law(k, j).pgf(1.0 - lambda / double(k));
    return gamma_k * (1.0 - h);
}

/// Generator of the scaled chain applied to e_l(x) = e^{-l x}:
/// A_k e_l(x) = gamma_k [ c_k^(kx)(g_k(e^{-l/k})) - e^{-l x} ].
/// x must lie on the k^{-1} N_0 lattice (to 1e-9).
inline double chain_generator_exp(const ScaledModel& model, double x, double lambda) {
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
    if (!(x >= 0.0)) throw ValidationError("x must be non-negative");
    const double kx = double(model.k) * x;
    const double rounded = std::nearbyint(kx);
    if (std::abs(kx - rounded) > 1e-9)
        throw ValidationError("chain_generator_exp: k*x must be integral within 1e-9");
    const auto j = static_cast<std::int64_t>(rounded);
    const double s = model.offspring.pgf(std::exp(-lambda / double(model.k)));
    return model.gamma_k * (control_pgf(model.controls, model.k, j, s) - std::exp(-lambda * x));
}

/// Limit generator on exponentials:
/// A e_l(x) = e^{-l x} [ x (G(l) + rho0 l + gamma0 sigma0 m^2 l^2 / 2) - H(x, m l) ].
inline double limit_generator_exp(const LimitParams& params, double x, double lambda) {
    if (!(x >= 0.0) || !(lambda >= 0.0))
        throw ValidationError("limit generator arguments must be non-negative");
    const double branch = branching_mechanism(params, lambda) + params.rho0 * lambda +
                          0.5 * params.gamma0 * params.sigma0 * params.m * params.m * lambda * lambda;
    const double immig = immigration_mechanism(params, x, params.m * lambda);
    return std::exp(-lambda * x) * (x * branch - immig);
}

/// Lattice grid {0, stride/k, 2 stride/k, ...} covering [0, x_max] with at
/// most max_points points; stride is the smallest multiple of 1/k that fits.
inline std::vector<double> default_state_grid(std::int64_t k, double x_max = 20.0,
                                              std::size_t max_points = 2000) {
    if (k < 1) throw ValidationError("k must be positive");
    if (!(x_max > 0.0)) throw ValidationError("x_max must be positive");
    const double total = double(k) * x_max;
    const auto stride = static_cast<std::int64_t>(std::max(1.0, std::ceil(total / double(max_points))));
    std::vector<double> grid;
    for (std::int64_t i = 0; double(i) * double(stride) <= total; ++i)
        grid.push_back(double(i * stride) / double(k));
    return grid;
}

/// Max over the grid of |A_k e_l - A e_l| — the finite surrogate for the
/// supremum over k^{-1} N_0; beyond the grid the integrand is exponentially
/// damped, so a bounded window suffices for the convergence diagnostics.
inline double generator_gap(const ScaledModel& model, const LimitParams& params, double lambda,
                            std::span<const double> x_grid) {
    double worst = 0.0;
    for (double x : x_grid) {
        const double gap = std::abs(chain_generator_exp(model, x, lambda) -
                                    limit_generator_exp(params, x, lambda));
        worst = std::max(worst, gap);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Complete monotonicity (iterated forward differences)
// ---------------------------------------------------------------------------

struct MonotoneReport {
    bool holds = true;
    double worst_value = 0.0; // min over (j, lambda) of (-1)^j D_d^j D_c^2 fn
    int worst_j = 0;
    double worst_lambda = 0.0;
};

/// Checks the sign alternation (-1)^j D_d^j D_c^2 fn(lambda) >= -tol for
/// j <= j_max over the lambda grid, computing the iterated forward
/// differences by their recursive definition. All evaluation points must stay
/// inside [0, domain_max].
inline MonotoneReport complete_monotone_check(const std::function<double(double)>& fn,
                                              double domain_max, double c, double d, int j_max,
                                              std::span<const double> lambda_grid, double tol) {
    if (!(c > 0.0) || !(d > 0.0)) throw ValidationError("difference steps must be positive");
    if (j_max < 0) throw ValidationError("j_max must be non-negative");
    for (double l : lambda_grid)
        if (!(l >= 0.0) || l + double(j_max) * d + 2.0 * c > domain_max + 1e-12)
            throw ValidationError("complete_monotone_check: evaluation points leave the domain");
    MonotoneReport report;
    report.worst_value = std::numeric_limits<double>::infinity();
    std::vector<double> diff(static_cast<std::size_t>(j_max) + 1);
    for (double l : lambda_grid) {
        // second central block: D_c^2 fn at l + i d
        for (int i = 0; i <= j_max; ++i) {
            const double y = l + double(i) * d;
            diff[static_cast<std::size_t>(i)] = fn(y + 2.0 * c) - 2.0 * fn(y + c) + fn(y);
        }
        double sign = 1.0;
        for (int j = 0; j <= j_max; ++j) {
            const double value = sign * diff[0];
            if (value < report.worst_value) {
                report.worst_value = value;
                report.worst_j = j;
                report.worst_lambda = l;
            }
            if (value < -tol) report.holds = false;
            for (int i = 0; i + j < j_max; ++i)
                diff[static_cast<std::size_t>(i)] =
                    diff[static_cast<std::size_t>(i) + 1] - diff[static_cast<std::size_t>(i)];
            sign = -sign;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Convergence diagnostics
// ---------------------------------------------------------------------------

namespace detail {

// log(f) / (f - 1), series-expanded near f = 1 to dodge cancellation.
inline double log_over_em1(double f) {
    const double u = f - 1.0;
    if (std::abs(u) < 1e-6) return 1.0 - u / 2.0 + u * u / 3.0 - u * u * u / 4.0;
    return std::log(f) / u;
}

} // namespace detail

/// |S_k(l) - (G(l) + gamma0 l^2 / 2)|.
inline double sk_deviation(const ScaledModel& model, const LimitParams& params, double lambda) {
    return std::abs(branching_mechanism_exp_k(model, lambda) -
                    (branching_mechanism(params, lambda) + 0.5 * params.gamma0 * lambda * lambda));
}

/// |T_k(l) - m l|.
inline double tk_deviation(const ScaledModel& model, double lambda) {
    return std::abs(offspring_cumulant_k(model, lambda) - model.m * lambda);
}

/// Max over the x grid of |gamma_k [1 - h_k^(floor(kx))(g_k(e^{-l/k}))] - H(x, m l)|.
inline double immigration_composition_dev(const ScaledModel& model, const LimitParams& params,
                                          double lambda, std::span<const double> x_grid) {
    const double s = model.offspring.pgf(std::exp(-lambda / double(model.k)));
    double worst = 0.0;
    for (double x : x_grid) {
        const auto j = static_cast<std::int64_t>(std::floor(double(model.k) * x + 1e-12));
        const double lhs =
            model.gamma_k * (1.0 - model.controls.immigration_law(model.k, j).pgf(s));
        const double rhs = immigration_mechanism(params, x, params.m * lambda);
        worst = std::max(worst, std::abs(lhs - rhs));
    }
    return worst;
}

/// Sup over the j grid of |gamma_k [1 - log f / (f - 1)] + gamma0 l / 2|
/// with f = f_k^(j)(g_k(e^{-l/k})).
inline double root_log_ratio_dev(const ScaledModel& model, double lambda,
                                 std::span<const std::int64_t> j_grid) {
    const double s = model.offspring.pgf(std::exp(-lambda / double(model.k)));
    double worst = 0.0;
    for (std::int64_t j : j_grid) {
        const double f = model.controls.root_law(model.k, j).pgf(s);
        const double value =
            model.gamma_k * (1.0 - detail::log_over_em1(f)) + 0.5 * model.gamma0 * lambda;
        worst = std::max(worst, std::abs(value));
    }
    return worst;
}

/// Sup over the j grid of |f_k^(j)''(g_k(e^{-l/k})) - f_k^(j)''(1-)|.
/// A finite surrogate for the uniform-in-j limit; the grid used should be
/// reported alongside the value.
inline double root_second_derivative_dev(const ScaledModel& model, double lambda,
                                         std::span<const std::int64_t> j_grid) {
    const double s = model.offspring.pgf(std::exp(-lambda / double(model.k)));
    double worst = 0.0;
    for (std::int64_t j : j_grid) {
        const LatticeLaw root = model.controls.root_law(model.k, j);
        worst = std::max(worst, std::abs(root.pgf_derivative(s, 2) - root.factorial_moment(2)));
    }
    return worst;
}

} // namespace cbp
