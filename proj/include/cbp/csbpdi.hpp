#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cbp/mechanisms.hpp"

namespace cbp {

/// Euler-Maruyama path of the limiting process of the rescaled chains:
///   dz = [m alpha(z) - (a + rho0) z] dt + sqrt((b^2 + m^2 gamma0 sigma0) z) dW
///        + compensated branching jumps (mu)  + immigration jumps (nu).
///
/// Positivity is handled by full truncation: coefficients are evaluated at
/// max(z, 0) and the state is clamped at 0 after every step. Branching jumps
/// from each mu atom (u, w) arrive at rate w z per unit time with size u and
/// compensator w u z subtracted from the drift. Immigration atoms are the
/// pre-transform nu of the generator definition; the limit's m-rescaling is
/// applied here (size m u at rate w r(z, u), drift term m alpha). Jump counts
/// per step are Poisson with the state frozen at the left endpoint, so the
/// step must keep dt * (total jump rate) <= 0.1 or the run is rejected.
inline PathSample simulate_csbpdi_path(const LimitParams& params, double z0, double horizon_T,
                                       double dt, RngStream& rng, std::uint64_t seed_id = 0) {
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(horizon_T >= dt)) throw ValidationError("horizon must be at least one step");
    if (!(z0 >= 0.0)) throw ValidationError("initial state must be non-negative");
    const double c2 = params.b * params.b + params.m * params.m * params.gamma0 * params.sigma0;
    const double decay = params.a + params.rho0;
    const double sqrt_dt = std::sqrt(dt);
    const auto n_steps = static_cast<std::size_t>(std::floor(horizon_T / dt + 1e-9));

    PathSample path;
    path.seed = seed_id;
    path.times.resize(n_steps + 1);
    path.values.resize(n_steps + 1);
    double z = z0;
    path.times[0] = 0.0;
    path.values[0] = z;
    for (std::size_t step = 1; step <= n_steps; ++step) {
        const double zc = std::max(z, 0.0);
        double jump_rate = 0.0;
        double drift = params.m * params.alpha(zc) - decay * zc;
        double jumps = 0.0;
        for (const auto& atom : params.mu_atoms) {
            const double rate = atom.weight * zc;
            jump_rate += rate;
            drift -= atom.weight * atom.u * zc; // compensator
            if (rate > 0.0) {
                const std::int64_t n = detail::poisson_sample(rate * dt, rng);
                jumps += atom.u * double(n);
            }
        }
        for (const auto& atom : params.nu_atoms) {
            const double rate = atom.weight * params.r(zc, atom.u);
            jump_rate += rate;
            if (rate > 0.0) {
                const std::int64_t n = detail::poisson_sample(rate * dt, rng);
                jumps += params.m * atom.u * double(n);
            }
        }
        if (dt * jump_rate > 0.1)
            throw ValidationError("dt too coarse for the jump rates (dt * rate > 0.1)");
        const double diffusion = std::sqrt(c2 * zc) * sqrt_dt * rng.next_normal();
        z = z + drift * dt + diffusion + jumps;
        if (z < 0.0) z = 0.0;
        if (std::isnan(z)) throw NumericError("CSBPDI state became NaN");
        path.times[step] = double(step) * dt;
        path.values[step] = z;
    }
    return path;
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
};

/// Closed-form first two moments of the jump-free limit (the square-root
/// diffusion dz = (beta0 + beta1 z) dt + sqrt(c^2 z) dW with beta0 = alpha m,
/// beta1 = -(a + rho0), c^2 = b^2 + gamma0 sigma0 m^2):
///   mean'(t) = beta0 + beta1 mean(t)
///   var'(t)  = 2 beta1 var(t) + c^2 mean(t)
/// Requires a constant alpha and empty jump measures.
inline Moments feller_moments(const LimitParams& params, double z0, double t) {
    if (!params.alpha_const || !params.mu_atoms.empty() || !params.nu_atoms.empty())
        throw ValidationError("feller_moments requires constant alpha and no jump atoms");
    if (!(t >= 0.0)) throw ValidationError("time must be non-negative");
    const double beta0 = *params.alpha_const * params.m;
    const double beta1 = -(params.a + params.rho0);
    const double c2 = params.b * params.b + params.gamma0 * params.sigma0 * params.m * params.m;
    Moments out;
    if (std::abs(beta1) < 1e-14) {
        out.mean = z0 + beta0 * t;
        out.variance = c2 * (z0 * t + 0.5 * beta0 * t * t);
        return out;
    }
    const double kappa = -beta1; // mean-reversion rate when positive
    const double e1 = std::exp(-kappa * t);
    const double e2 = e1 * e1;
    const double theta = beta0 / kappa;
    out.mean = z0 * e1 + theta * (1.0 - e1);
    out.variance = c2 * (z0 * (e1 - e2) / kappa + theta * (1.0 - e1) * (1.0 - e1) / (2.0 * kappa));
    return out;
}

/// Laplace transform E[e^{-lambda z(t)}] of the jump-free limit via the
/// affine-process Riccati system
///   v' = beta1 v - (c^2/2) v^2,  v(0) = lambda
///   w' = beta0 v,                w(0) = 0
/// integrated by classical RK4; the transform is exp(-z0 v(t) - w(t)).
/// Independent of the Euler-Maruyama path machinery by construction.
inline double feller_laplace(const LimitParams& params, double z0, double t, double lambda,
                             int rk4_steps = 4096) {
    if (!params.alpha_const || !params.mu_atoms.empty() || !params.nu_atoms.empty())
        throw ValidationError("feller_laplace requires constant alpha and no jump atoms");
    if (!(t >= 0.0) || !(lambda >= 0.0))
        throw ValidationError("feller_laplace arguments must be non-negative");
    const double beta0 = *params.alpha_const * params.m;
    const double beta1 = -(params.a + params.rho0);
    const double c2 = params.b * params.b + params.gamma0 * params.sigma0 * params.m * params.m;
    const double h = t / double(rk4_steps);
    auto fv = [&](double v) { return beta1 * v - 0.5 * c2 * v * v; };
    double v = lambda, w = 0.0;
    for (int i = 0; i < rk4_steps; ++i) {
        const double k1v = fv(v), k1w = beta0 * v;
        const double k2v = fv(v + 0.5 * h * k1v), k2w = beta0 * (v + 0.5 * h * k1v);
        const double k3v = fv(v + 0.5 * h * k2v), k3w = beta0 * (v + 0.5 * h * k2v);
        const double k4v = fv(v + h * k3v), k4w = beta0 * (v + h * k3v);
        w += h / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    return std::exp(-z0 * v - w);
}

struct McEstimate {
    double estimate = 0.0;
    double std_error = 0.0;
};

namespace detail {

inline McEstimate laplace_from_values(std::span<const double> values, double lambda) {
    const double n = double(values.size());
    double sum = 0.0, sumsq = 0.0;
    for (double z : values) {
        const double e = std::exp(-lambda * z);
        sum += e;
        sumsq += e * e;
    }
    McEstimate out;
    out.estimate = sum / n;
    if (values.size() > 1) {
        const double var = std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0));
        out.std_error = std::sqrt(var / n);
    }
    return out;
}

} // namespace detail

/// Monte-Carlo estimate of E[e^{-lambda z(t)}] across a path collection;
/// t must lie on every path's grid.
inline McEstimate laplace_mc(std::span<const PathSample> paths, double t, double lambda) {
    if (paths.empty()) throw ValidationError("laplace_mc needs at least one path");
    if (!(lambda >= 0.0)) throw ValidationError("lambda must be non-negative");
    std::vector<double> values;
    values.reserve(paths.size());
    for (const auto& path : paths) {
        std::size_t idx = path.times.size(); // sentinel
        for (std::size_t i = 0; i < path.times.size(); ++i) {
            if (std::abs(path.times[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) {
                idx = i;
                break;
            }
        }
        if (idx >= path.times.size())
            throw ValidationError("laplace_mc: time does not lie on the path grid");
        values.push_back(path.values[idx]);
    }
    return detail::laplace_from_values(values, lambda);
}

} // namespace cbp
