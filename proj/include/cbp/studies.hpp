#pragma once

#include <array>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cbp/config.hpp"

namespace cbp {

struct StudyOptions {
    std::uint64_t seed = 1; // effective seed (config value or CLI override)
    int threads = 1;
    bool quiet = false;
};

namespace detail {

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xCBF29CE484222325ull) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

/// Provenance hash echoed on every CSV row: config bytes + effective seed.
inline std::string config_hash(const ParsedConfig& raw, std::uint64_t seed) {
    std::uint64_t h = fnv1a64(raw.raw_text.data(), raw.raw_text.size());
    h = fnv1a64(&seed, sizeof(seed), h);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
    return std::string(buf);
}

/// Floats are printed with 17 significant digits (round-trip exact).
inline std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

/// Runs fn(i) for i in [0, n) on `threads` workers in fixed stripes. Callers
/// must write results into preallocated per-index slots; any reduction happens
/// afterwards in index order, so the output is independent of the worker count.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n < 2) {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    const std::int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = w * chunk;
        const std::int64_t hi = std::min<std::int64_t>(n, lo + chunk);
        pool.emplace_back([lo, hi, &fn]() {
            for (std::int64_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline std::int64_t initial_state(const ExperimentConfig& cfg, std::int64_t k) {
    if (cfg.z0_rule == "k") return k;
    return static_cast<std::int64_t>(std::llround(cfg.z0_const));
}

struct SummaryStats {
    double mean = 0.0, mean_se = 0.0;
    double variance = 0.0, variance_se = 0.0;
};

inline SummaryStats summarize(std::span<const double> values) {
    const double n = double(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / n;
    double m2 = 0.0, m4 = 0.0;
    for (double v : values) {
        const double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    SummaryStats out;
    out.mean = mean;
    if (values.size() > 1) {
        out.variance = m2 / (n - 1.0);
        out.mean_se = std::sqrt(out.variance / n);
        // delta-method standard error of the sample variance
        const double mu4 = m4 / n;
        out.variance_se = std::sqrt(std::max(0.0, mu4 - out.variance * out.variance) / n);
    }
    return out;
}

} // namespace detail

// ---------------------------------------------------------------------------
// converge — generator gap and functional deviations per k
// ---------------------------------------------------------------------------

inline std::string run_convergence_study(const ExperimentConfig& cfg, const StudyOptions& opt) {
    const std::string hash = detail::config_hash(cfg.raw, opt.seed);
    const LimitParams params = build_limit(cfg);
    std::ostringstream out;
    out << "config_hash,k,gamma_k,diagnostic,lambda,value\n";
    for (std::int64_t k : cfg.k_list) {
        const ScaledModel model = build_model(cfg, k);
        const std::vector<double> x_grid = default_state_grid(k, cfg.x_max, cfg.grid_cap);
        const std::string prefix = hash + "," + std::to_string(k) + "," + detail::g17(model.gamma_k);
        for (double lambda : cfg.lambda_grid) {
            out << prefix << ",generator_gap," << detail::g17(lambda) << ','
                << detail::g17(generator_gap(model, params, lambda, x_grid)) << '\n';
            out << prefix << ",sk_deviation," << detail::g17(lambda) << ','
                << detail::g17(sk_deviation(model, params, lambda)) << '\n';
            out << prefix << ",tk_deviation," << detail::g17(lambda) << ','
                << detail::g17(tk_deviation(model, lambda)) << '\n';
            out << prefix << ",hk_composition_deviation," << detail::g17(lambda) << ','
                << detail::g17(immigration_composition_dev(model, params, lambda, x_grid)) << '\n';
        }
        if (model.controls.declared_limits()) {
            const std::array<std::int64_t, 1> ks{k};
            const auto report =
                verify_root_moment_limits(model.controls, cfg.m, cfg.gamma, ks, cfg.j_max);
            out << prefix << ",moment_limit_dev1,0," << detail::g17(report.rows[0].dev1) << '\n';
            out << prefix << ",moment_limit_dev2,0," << detail::g17(report.rows[0].dev2) << '\n';
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// compare — marginal-law comparison of the rescaled CBP and the limit
// ---------------------------------------------------------------------------

inline std::string run_distribution_comparison(const ExperimentConfig& cfg, const StudyOptions& opt) {
    const std::string hash = detail::config_hash(cfg.raw, opt.seed);
    const LimitParams params = build_limit(cfg);
    const bool feller_closed_form =
        params.alpha_const.has_value() && params.mu_atoms.empty() && params.nu_atoms.empty();
    const double t_max = cfg.t_grid.back();
    std::ostringstream out;
    out << "config_hash,k,t,lambda,quantity,cbp_value,cbp_se,limit_value,limit_se,diff,"
           "combined_se,diff_over_se\n";

    for (std::int64_t k : cfg.k_list) {
        const ScaledModel model = build_model(cfg, k);
        const std::int64_t z0 = detail::initial_state(cfg, k);
        const double z0_limit = double(z0) / double(k);
        const std::size_t n_t = cfg.t_grid.size();
        const auto n_paths = static_cast<std::size_t>(cfg.path_count);

        std::vector<double> cbp_values(n_paths * n_t);
        detail::parallel_for(cfg.path_count, opt.threads, [&](std::int64_t path) {
            RngStream rng = RngStream::derive(opt.seed, static_cast<std::uint64_t>(path));
            const auto vals = simulate_scaled_at(model, z0, cfg.t_grid, rng);
            for (std::size_t ti = 0; ti < n_t; ++ti)
                cbp_values[static_cast<std::size_t>(path) * n_t + ti] = vals[ti];
        });

        std::vector<double> limit_values;
        if (!feller_closed_form) {
            limit_values.resize(n_paths * n_t);
            detail::parallel_for(cfg.path_count, opt.threads, [&](std::int64_t path) {
                RngStream rng = RngStream::derive(opt.seed ^ 0xA5A5A5A5A5A5A5A5ull,
                                                  static_cast<std::uint64_t>(path));
                const PathSample ps =
                    simulate_csbpdi_path(params, z0_limit, t_max, cfg.dt, rng,
                                         static_cast<std::uint64_t>(path));
                for (std::size_t ti = 0; ti < n_t; ++ti) {
                    const double t = cfg.t_grid[ti];
                    const auto idx = static_cast<std::size_t>(std::llround(t / cfg.dt));
                    if (idx >= ps.values.size() ||
                        std::abs(ps.times[idx] - t) > 1e-9 * std::max(1.0, t))
                        throw ValidationError("t_grid times must lie on the dt grid");
                    limit_values[static_cast<std::size_t>(path) * n_t + ti] = ps.values[idx];
                }
            });
        }

        std::vector<double> col(n_paths);
        for (std::size_t ti = 0; ti < n_t; ++ti) {
            const double t = cfg.t_grid[ti];
            for (std::size_t pi = 0; pi < n_paths; ++pi) col[pi] = cbp_values[pi * n_t + ti];
            const detail::SummaryStats cbp_stats = detail::summarize(col);

            std::vector<double> limit_col;
            detail::SummaryStats limit_stats;
            Moments limit_moments;
            if (feller_closed_form) {
                limit_moments = feller_moments(params, z0_limit, t);
            } else {
                limit_col.resize(n_paths);
                for (std::size_t pi = 0; pi < n_paths; ++pi)
                    limit_col[pi] = limit_values[pi * n_t + ti];
                limit_stats = detail::summarize(limit_col);
                limit_moments = Moments{limit_stats.mean, limit_stats.variance};
            }

            auto emit = [&](const std::string& quantity, double lambda, double cv, double cse,
                            double lv, double lse) {
                const double diff = cv - lv;
                const double combined = std::sqrt(cse * cse + lse * lse);
                out << hash << ',' << k << ',' << detail::g17(t) << ',' << detail::g17(lambda)
                    << ',' << quantity << ',' << detail::g17(cv) << ',' << detail::g17(cse) << ','
                    << detail::g17(lv) << ',' << detail::g17(lse) << ',' << detail::g17(diff) << ','
                    << detail::g17(combined) << ','
                    << detail::g17(combined > 0.0 ? std::abs(diff) / combined : 0.0) << '\n';
            };

            for (double lambda : cfg.lambda_grid) {
                const McEstimate cbp_lap = detail::laplace_from_values(col, lambda);
                McEstimate limit_lap;
                if (feller_closed_form) {
                    limit_lap.estimate = feller_laplace(params, z0_limit, t, lambda);
                    limit_lap.std_error = 0.0;
                } else {
                    limit_lap = detail::laplace_from_values(limit_col, lambda);
                }
                emit("laplace", lambda, cbp_lap.estimate, cbp_lap.std_error, limit_lap.estimate,
                     limit_lap.std_error);
            }
            emit("mean", 0.0, cbp_stats.mean, cbp_stats.mean_se, limit_moments.mean,
                 feller_closed_form ? 0.0 : limit_stats.mean_se);
            emit("variance", 0.0, cbp_stats.variance, cbp_stats.variance_se, limit_moments.variance,
                 feller_closed_form ? 0.0 : limit_stats.variance_se);
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// simulate — raw paths to CSV
// ---------------------------------------------------------------------------

inline std::string run_path_dump(const ExperimentConfig& cfg, const StudyOptions& opt) {
    const std::string hash = detail::config_hash(cfg.raw, opt.seed);
    const double horizon = cfg.t_grid.back();
    const std::int64_t k = cfg.k_list.front();
    const auto n_paths = static_cast<std::size_t>(cfg.path_count);
    std::vector<PathSample> paths(n_paths);

    if (cfg.process == "cbp") {
        const ScaledModel model = build_model(cfg, k);
        const std::int64_t z0 = detail::initial_state(cfg, k);
        detail::parallel_for(cfg.path_count, opt.threads, [&](std::int64_t path) {
            RngStream rng = RngStream::derive(opt.seed, static_cast<std::uint64_t>(path));
            paths[static_cast<std::size_t>(path)] = simulate_scaled_path(
                model, z0, horizon, cfg.dt, rng, static_cast<std::uint64_t>(path));
        });
    } else {
        const LimitParams params = build_limit(cfg);
        const double z0 = double(detail::initial_state(cfg, k)) / double(k);
        detail::parallel_for(cfg.path_count, opt.threads, [&](std::int64_t path) {
            RngStream rng =
                RngStream::derive(opt.seed ^ 0xA5A5A5A5A5A5A5A5ull, static_cast<std::uint64_t>(path));
            paths[static_cast<std::size_t>(path)] = simulate_csbpdi_path(
                params, z0, horizon, cfg.dt, rng, static_cast<std::uint64_t>(path));
        });
    }

    std::ostringstream out;
    out << "config_hash,process,k,path,t,value\n";
    for (std::size_t pi = 0; pi < n_paths; ++pi) {
        const auto& path = paths[pi];
        for (std::size_t i = 0; i < path.times.size(); ++i)
            out << hash << ',' << cfg.process << ',' << k << ',' << pi << ','
                << detail::g17(path.times[i]) << ',' << detail::g17(path.values[i]) << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// check — family assumption verifiers
// ---------------------------------------------------------------------------

inline std::string run_family_check(const ExperimentConfig& cfg, const StudyOptions& opt) {
    const std::string hash = detail::config_hash(cfg.raw, opt.seed);
    const ControlFamily family = build_family(cfg);
    std::ostringstream out;
    out << "config_hash,k,gamma_k,diagnostic,value,mode\n";
    const auto report =
        verify_root_moment_limits(family, cfg.m, cfg.gamma, cfg.k_list, cfg.j_max);
    for (const auto& row : report.rows) {
        out << hash << ',' << row.k << ',' << detail::g17(row.gamma_k) << ",moment_limit_dev1,"
            << detail::g17(row.dev1) << ',' << report.mode << '\n';
        out << hash << ',' << row.k << ',' << detail::g17(row.gamma_k) << ",moment_limit_dev2,"
            << detail::g17(row.dev2) << ',' << report.mode << '\n';
    }
    for (std::int64_t k : cfg.k_list) {
        const double gamma_k = cfg.gamma.gamma(k);
        const auto grid = default_state_grid(k, cfg.x_max, cfg.grid_cap);
        const auto growth = estimate_immigration_growth(family, k, gamma_k, grid);
        out << hash << ',' << k << ',' << detail::g17(gamma_k) << ",immigration_growth_K1,"
            << detail::g17(growth.K1_hat) << ",\n";
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// monotone — complete monotonicity of the discrete branching mechanism
// ---------------------------------------------------------------------------

inline std::string run_monotone_check(const ExperimentConfig& cfg, const StudyOptions& opt) {
    const std::string hash = detail::config_hash(cfg.raw, opt.seed);
    std::ostringstream out;
    out << "config_hash,k,gamma_k,holds,worst_value,worst_j,worst_lambda\n";
    for (std::int64_t k : cfg.k_list) {
        const ScaledModel model = build_model(cfg, k);
        std::vector<double> lambda_grid;
        for (int i = 0; i < cfg.mono_lambda_points; ++i)
            lambda_grid.push_back(cfg.mono_lambda_max * double(i) /
                                  double(std::max(1, cfg.mono_lambda_points - 1)));
        const auto fn = [&model](double lambda) { return branching_mechanism_k(model, lambda); };
        const MonotoneReport report =
            complete_monotone_check(fn, double(k), cfg.mono_c, cfg.mono_d, cfg.mono_j_max,
                                    lambda_grid, cfg.mono_tol);
        out << hash << ',' << k << ',' << detail::g17(model.gamma_k) << ','
            << (report.holds ? 1 : 0) << ',' << detail::g17(report.worst_value) << ','
            << report.worst_j << ',' << detail::g17(report.worst_lambda) << '\n';
    }
    return out.str();
}

} // namespace cbp
