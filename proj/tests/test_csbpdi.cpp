#include <catch2/catch_amalgamated.hpp>

#include "cbp/csbpdi.hpp"

#include "test_util.hpp"

using namespace cbp;

namespace {

LimitParams feller(double a_plus_rho0, double b, double alpha, double m = 1.0) {
    LimitParams params;
    params.a = a_plus_rho0;
    params.b = b;
    params.alpha = [alpha](double) { return alpha; };
    params.alpha_const = alpha;
    params.m = m;
    return params.validate();
}

// closed-form CIR Laplace transform, independent derivation used to check the
// RK4 oracle: v(t) = 1/(A e^{-b1 t} + B), w(t) = (b0/(b1 B)) log((A + B e^{b1 t})/(A + B))
double cir_laplace_closed_form(double beta0, double beta1, double c2, double z0, double t,
                               double lambda) {
    const double B = c2 / (2.0 * beta1);
    const double A = 1.0 / lambda - B;
    const double v = 1.0 / (A * std::exp(-beta1 * t) + B);
    const double w = beta0 / (beta1 * B) * std::log((A + B * std::exp(beta1 * t)) / (A + B));
    return std::exp(-z0 * v - w);
}

} // namespace

TEST_CASE("zero-noise configuration reproduces the linear ODE") {
    const double dt = 1e-3;
    SECTION("mean-reverting case") {
        const LimitParams params = feller(1.0, 0.0, 1.0);
        RngStream rng(1);
        const PathSample path = simulate_csbpdi_path(params, 2.0, 1.0, dt, rng);
        for (std::size_t i = 0; i < path.times.size(); ++i) {
            const double t = path.times[i];
            const double exact = 2.0 * std::exp(-t) + 1.0 * (1.0 - std::exp(-t));
            REQUIRE(std::abs(path.values[i] - exact) <= 5.0 * dt);
        }
    }
    SECTION("pure drift case") {
        const LimitParams params = feller(0.0, 0.0, 0.5, 2.0);
        RngStream rng(2);
        const PathSample path = simulate_csbpdi_path(params, 0.3, 1.0, dt, rng);
        const double got = path.values.back();
        REQUIRE(std::abs(got - (0.3 + 1.0 * 1.0)) <= 5.0 * dt); // drift alpha m = 1
    }
}

TEST_CASE("absorbing zero state with no immigration stays at zero") {
    const LimitParams params = feller(0.5, 1.0, 0.0);
    RngStream rng(3);
    const PathSample path = simulate_csbpdi_path(params, 0.0, 1.0, 1e-3, rng);
    for (double v : path.values) REQUIRE(v == 0.0);
}

TEST_CASE("feller_moments closed forms") {
    const LimitParams params = feller(1.0, 1.0, 1.0);
    SECTION("time zero") {
        const Moments m = feller_moments(params, 3.0, 0.0);
        REQUIRE(m.mean == 3.0);
        REQUIRE(m.variance == 0.0);
    }
    SECTION("frozen dynamics") {
        const LimitParams frozen = feller(0.0, 0.0, 0.0);
        for (double t : {0.5, 2.0}) {
            const Moments m = feller_moments(frozen, 3.0, t);
            REQUIRE(m.mean == 3.0);
            REQUIRE(m.variance == 0.0);
        }
    }
    SECTION("long-run fixed point alpha m / (a + rho0)") {
        const Moments m = feller_moments(params, 0.0, 40.0);
        REQUIRE(m.mean == Catch::Approx(1.0).margin(1e-9));
    }
    SECTION("atoms and non-constant alpha are rejected") {
        LimitParams jumpy = feller(1.0, 1.0, 1.0);
        jumpy.mu_atoms = {{1.0, 0.5}};
        REQUIRE_THROWS_AS(feller_moments(jumpy, 1.0, 1.0), ValidationError);
    }
}

TEST_CASE("feller_moments agree with Euler-Maruyama Monte Carlo") {
    // c^2 = b^2 + gamma0 sigma0 m^2 exercises the sigma0 contribution too
    LimitParams params = feller(0.8, 1.0, 0.5);
    params.gamma0 = 1.0;
    params.sigma0 = 0.5;
    const double dt = 5e-3, t = 1.0, z0 = 1.0;
    const int n = 100000;
    std::vector<double> finals(n);
    for (int i = 0; i < n; ++i) {
        RngStream rng = RngStream::derive(55, static_cast<std::uint64_t>(i));
        const PathSample path = simulate_csbpdi_path(params, z0, t, dt, rng);
        finals[static_cast<std::size_t>(i)] = path.values.back();
    }
    const auto stats = testutil::summarize(finals);
    const Moments exact = feller_moments(params, z0, t);
    REQUIRE(std::abs(stats.mean - exact.mean) < 3.0 * stats.se + 2.0 * dt);
    const double var_mc = stats.sd * stats.sd;
    double m4 = 0.0;
    for (double v : finals) m4 += std::pow(v - stats.mean, 4.0);
    m4 /= double(n);
    const double var_se = std::sqrt(std::max(0.0, m4 - var_mc * var_mc) / double(n));
    REQUIRE(std::abs(var_mc - exact.variance) < 3.0 * var_se + 4.0 * dt);
}

TEST_CASE("Corollary parameters: 1e4-path sample mean sits in the 3-SE band") {
    const LimitParams params = feller(1.0, 1.0, 1.0);
    const int n = 10000;
    std::vector<double> finals(n);
    for (int i = 0; i < n; ++i) {
        RngStream rng = RngStream::derive(58, static_cast<std::uint64_t>(i));
        finals[static_cast<std::size_t>(i)] =
            simulate_csbpdi_path(params, 1.0, 1.0, 1e-3, rng).values.back();
    }
    const auto stats = testutil::summarize(finals);
    const Moments exact = feller_moments(params, 1.0, 1.0);
    REQUIRE(std::abs(stats.mean - exact.mean) < 3.0 * stats.se);
}

TEST_CASE("halving dt moves the sample mean by less than two combined errors") {
    const LimitParams params = feller(1.0, 1.0, 1.0);
    const int n = 10000;
    auto run = [&](double dt, std::uint64_t seed) {
        std::vector<double> finals(n);
        for (int i = 0; i < n; ++i) {
            RngStream rng = RngStream::derive(seed, static_cast<std::uint64_t>(i));
            finals[static_cast<std::size_t>(i)] =
                simulate_csbpdi_path(params, 1.0, 1.0, dt, rng).values.back();
        }
        return testutil::summarize(finals);
    };
    const auto coarse = run(2e-3, 60);
    const auto fine = run(1e-3, 61);
    const double combined = std::sqrt(coarse.se * coarse.se + fine.se * fine.se);
    REQUIRE(std::abs(coarse.mean - fine.mean) < 2.0 * combined);
}

TEST_CASE("compensated branching jumps preserve the drift ODE") {
    LimitParams params;
    params.a = 0.5;
    params.b = 0.3;
    params.alpha = [](double) { return 0.0; };
    params.alpha_const = 0.0;
    params.mu_atoms = {{1.0, 1.0}};
    params.validate();
    const double t = 1.0, z0 = 1.0;
    const int n = 20000;
    std::vector<double> finals(n);
    for (int i = 0; i < n; ++i) {
        RngStream rng = RngStream::derive(70, static_cast<std::uint64_t>(i));
        finals[static_cast<std::size_t>(i)] =
            simulate_csbpdi_path(params, z0, t, 1e-3, rng).values.back();
    }
    const auto stats = testutil::summarize(finals);
    const double expected = z0 * std::exp(-0.5 * t); // jump mean cancels by compensation
    REQUIRE(std::abs(stats.mean - expected) < 3.0 * stats.se + 5e-3);
}

TEST_CASE("immigration jumps are rescaled by m") {
    // alpha = 0, r(x,u) = 1 against a single nu atom: jumps of size m*u at
    // rate w, so E z(t) = z0 + m*u*w*t when a + rho0 = 0 and b = 0.
    LimitParams params;
    params.alpha = [](double) { return 0.0; };
    params.alpha_const = 0.0;
    params.nu_atoms = {{0.5, 2.0}};
    params.r = [](double, double) { return 1.0; };
    params.m = 3.0;
    params.validate();
    const int n = 20000;
    std::vector<double> finals(n);
    for (int i = 0; i < n; ++i) {
        RngStream rng = RngStream::derive(71, static_cast<std::uint64_t>(i));
        finals[static_cast<std::size_t>(i)] =
            simulate_csbpdi_path(params, 0.0, 1.0, 1e-3, rng).values.back();
    }
    const auto stats = testutil::summarize(finals);
    REQUIRE(std::abs(stats.mean - 3.0 * 0.5 * 2.0) < 3.0 * stats.se + 1e-2);
}

TEST_CASE("paths stay non-negative near the boundary") {
    const LimitParams params = feller(1.0, 1.0, 0.1);
    for (int i = 0; i < 2000; ++i) {
        RngStream rng = RngStream::derive(80, static_cast<std::uint64_t>(i));
        const PathSample path = simulate_csbpdi_path(params, 0.01, 0.5, 1e-3, rng);
        for (double v : path.values) REQUIRE(v >= 0.0);
    }
}

TEST_CASE("overly coarse dt for the jump rates is rejected") {
    LimitParams params;
    params.alpha_const = 0.0;
    params.mu_atoms = {{1.0, 200.0}};
    params.validate();
    RngStream rng(90);
    REQUIRE_THROWS_AS(simulate_csbpdi_path(params, 1.0, 1.0, 1e-3, rng), ValidationError);
}

TEST_CASE("Riccati Laplace oracle matches the closed-form CIR transform") {
    const double a_plus_rho0 = 0.7, b = 1.2, alpha = 0.5;
    const LimitParams params = feller(a_plus_rho0, b, alpha);
    const double beta0 = alpha, beta1 = -a_plus_rho0, c2 = b * b;
    for (double t : {0.5, 1.0})
        for (double lambda : {0.5, 1.0, 2.0}) {
            const double closed = cir_laplace_closed_form(beta0, beta1, c2, 1.3, t, lambda);
            REQUIRE(feller_laplace(params, 1.3, t, lambda) ==
                    Catch::Approx(closed).margin(1e-10));
        }
    REQUIRE(feller_laplace(params, 1.3, 1.0, 0.0) == 1.0);
}

TEST_CASE("laplace_mc") {
    SECTION("lambda = 0 and constant paths are exact") {
        std::vector<PathSample> paths(3);
        for (auto& path : paths) {
            path.times = {0.0, 0.5, 1.0};
            path.values = {0.0, 0.0, 0.0};
        }
        const McEstimate at0 = laplace_mc(paths, 0.5, 0.0);
        REQUIRE(at0.estimate == 1.0);
        REQUIRE(at0.std_error == 0.0);
        const McEstimate zeros = laplace_mc(paths, 1.0, 2.0);
        REQUIRE(zeros.estimate == 1.0);
        REQUIRE(zeros.std_error == 0.0);
    }
    SECTION("off-grid times are rejected") {
        std::vector<PathSample> paths(1);
        paths[0].times = {0.0, 0.5};
        paths[0].values = {1.0, 1.0};
        REQUIRE_THROWS_AS(laplace_mc(paths, 0.3, 1.0), ValidationError);
    }
    SECTION("Feller paths match the Riccati oracle") {
        const LimitParams params = feller(1.0, 1.0, 1.0);
        const int n = 20000;
        std::vector<PathSample> paths(n);
        for (int i = 0; i < n; ++i) {
            RngStream rng = RngStream::derive(95, static_cast<std::uint64_t>(i));
            paths[static_cast<std::size_t>(i)] = simulate_csbpdi_path(params, 1.0, 1.0, 1e-3, rng);
        }
        const double lambda = 1.0;
        const McEstimate mc = laplace_mc(paths, 1.0, lambda);
        const double oracle = feller_laplace(params, 1.0, 1.0, lambda);
        REQUIRE(std::abs(mc.estimate - oracle) < 3.0 * mc.std_error + 2e-3);
    }
}
