#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cbp/control_family.hpp"

namespace cbp {

/// A fully specified k-th controlled branching process together with its
/// scaling data: z_k(t) = Z_k(floor(gamma_k t)) / k.
struct ScaledModel {
    std::int64_t k = 1;
    double gamma_k = 1.0;
    LatticeLaw offspring;
    ControlFamily controls;
    double m = 1.0;      // declared limit of the offspring means
    double gamma0 = 0.0; // declared limit of gamma_k / k
    bool offspring_fast_path = true;

    ScaledModel(std::int64_t k_, double gamma_k_, LatticeLaw offspring_, ControlFamily controls_,
                double m_, double gamma0_)
        : k(k_), gamma_k(gamma_k_), offspring(std::move(offspring_)), controls(std::move(controls_)),
          m(m_), gamma0(gamma0_) {
        if (k < 1) throw ValidationError("ScaledModel: k must be a positive integer");
        if (!(gamma_k > 0.0)) throw ValidationError("ScaledModel: gamma_k must be positive");
        if (!(m > 0.0)) throw ValidationError("ScaledModel: m must be positive");
        if (!(gamma0 >= 0.0)) throw ValidationError("ScaledModel: gamma0 must be non-negative");
        if (!std::isfinite(offspring.mean()))
            throw ValidationError("ScaledModel: offspring law must have finite mean");
    }
};

/// One simulated trajectory on a uniform time grid.
struct PathSample {
    std::vector<double> times;
    std::vector<double> values;
    std::uint64_t seed = 0; // stream identifier the path was drawn with
};

namespace detail {

// floor(gamma * t) with a one-ulp-scale nudge so grid times that are exact
// multiples in real arithmetic do not land one step short.
inline std::int64_t scaled_step_index(double gamma, double t) {
    const double x = gamma * t;
    if (x >= double(kMaxState)) throw NumericError("step index overflow");
    return static_cast<std::int64_t>(std::floor(x + 1e-9));
}

} // namespace detail

/// One generation: draw the control at the current size, then sum that many
/// offspring. The empty sum is 0. States never wrap: growth past the safe
/// integer range raises NumericError.
inline std::int64_t cbp_step(const ScaledModel& model, std::int64_t z, RngStream& rng) {
    if (z < 0) throw ValidationError("population size must be non-negative");
    const ControlDraw control = sample_control(model.controls, model.k, z, rng);
    return sample_iid_sum(model.offspring, control.total, rng, model.offspring_fast_path);
}

/// States of z_k at the given (sorted, non-negative) times, running the chain
/// once from Z_k(0) = z0. The path is right-continuous piecewise constant
/// between chain steps.
inline std::vector<double> simulate_scaled_at(const ScaledModel& model, std::int64_t z0,
                                              std::span<const double> times, RngStream& rng) {
    std::vector<double> out;
    out.reserve(times.size());
    std::int64_t z = z0;
    std::int64_t step = 0;
    double prev_t = 0.0;
    const double inv_k = 1.0 / double(model.k);
    for (double t : times) {
        if (!(t >= 0.0)) throw ValidationError("grid times must be non-negative");
        if (t < prev_t) throw ValidationError("grid times must be non-decreasing");
        prev_t = t;
        const std::int64_t target = detail::scaled_step_index(model.gamma_k, t);
        while (step < target) {
            z = cbp_step(model, z, rng);
            ++step;
        }
        out.push_back(double(z) * inv_k);
    }
    return out;
}

/// Rescaled path on the uniform grid {0, dt, 2dt, ...} up to horizon_T.
inline PathSample simulate_scaled_path(const ScaledModel& model, std::int64_t z0, double horizon_T,
                                       double grid_dt, RngStream& rng, std::uint64_t seed_id = 0) {
    if (!(grid_dt > 0.0)) throw ValidationError("grid_dt must be positive");
    if (!(horizon_T >= grid_dt)) throw ValidationError("horizon must be at least one grid step");
    const auto n_grid = static_cast<std::size_t>(std::floor(horizon_T / grid_dt + 1e-9));
    PathSample path;
    path.seed = seed_id;
    path.times.resize(n_grid + 1);
    for (std::size_t i = 0; i <= n_grid; ++i) path.times[i] = double(i) * grid_dt;
    path.values = simulate_scaled_at(model, z0, path.times, rng);
    return path;
}

/// Exact one-step transition PGF from state i:
/// sum_j Q(i,j) s^j = c_k^(i)(g_k(s)).
inline double transition_pgf(const ScaledModel& model, std::int64_t i, double s) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("PGF argument must lie in [0,1]");
    return control_pgf(model.controls, model.k, i, model.offspring.pgf(s));
}

} // namespace cbp
