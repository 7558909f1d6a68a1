#include <catch2/catch_amalgamated.hpp>

#include "cbp/cbp_process.hpp"

#include "test_util.hpp"

using namespace cbp;

namespace {

ControlFamily constant_family(LatticeLaw root, LatticeLaw imm, bool fast = true) {
    return ControlFamily([root](std::int64_t, std::int64_t) { return root; },
                         [imm](std::int64_t, std::int64_t) { return imm; }, std::nullopt, fast);
}

ScaledModel identity_model(std::int64_t k) {
    return ScaledModel(k, double(k), LatticeLaw(Dirac{1}),
                       constant_family(LatticeLaw(Dirac{1}), LatticeLaw(Dirac{0})), 1.0, 1.0);
}

// Expansion of the one-step transition law from state i: the law of the
// control total, then the mixture of offspring convolution powers. Pure pmf
// algebra, independent of the sampling code it checks.
std::vector<double> transition_pmf_oracle(const ScaledModel& model, std::int64_t i,
                                          std::size_t support) {
    const auto control_total = testutil::convolve(
        convolve_power(model.controls.root_law(model.k, i), i, support).explicit_pmf(),
        model.controls.immigration_law(model.k, i).materialized(support).explicit_pmf());
    const auto offspring = model.offspring.materialized(support).explicit_pmf();
    std::vector<double> result(1, 0.0);
    std::vector<double> power{1.0}; // offspring^{*phi}
    for (std::size_t phi = 0; phi < control_total.size(); ++phi) {
        if (result.size() < power.size()) result.resize(power.size(), 0.0);
        for (std::size_t idx = 0; idx < power.size(); ++idx)
            result[idx] += control_total[phi] * power[idx];
        power = testutil::convolve(power, offspring);
        if (power.size() > support) power.resize(support);
    }
    return result;
}

} // namespace

TEST_CASE("zero parents give an empty sum") {
    const ScaledModel model(10, 10.0, LatticeLaw(Poisson{1.5}),
                            constant_family(LatticeLaw(Poisson{1.0}), LatticeLaw(Dirac{0})), 1.5,
                            1.0);
    RngStream rng(1);
    for (int rep = 0; rep < 20; ++rep) REQUIRE(cbp_step(model, 0, rng) == 0);
}

TEST_CASE("deterministic identity model is a fixed point") {
    const ScaledModel model = identity_model(10);
    RngStream rng(2);
    REQUIRE(cbp_step(model, 42, rng) == 42);
}

TEST_CASE("one-step mean obeys Wald's identity") {
    const ScaledModel model(10, 10.0, LatticeLaw(Poisson{1.3}),
                            constant_family(LatticeLaw(Bernoulli{0.6}), LatticeLaw(Poisson{0.7})),
                            1.3, 1.0);
    RngStream rng(3);
    const std::int64_t z = 5;
    const int n = 100000;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i) draws[static_cast<std::size_t>(i)] = double(cbp_step(model, z, rng));
    const auto stats = testutil::summarize(draws);
    const double expected = 1.3 * (double(z) * 0.6 + 0.7);
    REQUIRE(std::abs(stats.mean - expected) < 3.0 * stats.se);
}

TEST_CASE("scaled path of the identity model is constant 1") {
    const ScaledModel model = identity_model(50);
    RngStream rng(4);
    const PathSample path = simulate_scaled_path(model, 50, 2.0, 0.25, rng);
    REQUIRE(path.times.size() == 9);
    for (double v : path.values) REQUIRE(v == 1.0);
}

TEST_CASE("horizon below one chain step leaves the path at z0/k") {
    const ScaledModel model(100, 1.0, LatticeLaw(Poisson{1.0}),
                            constant_family(LatticeLaw(Dirac{1}), LatticeLaw(Poisson{5.0})), 1.0,
                            0.0);
    // gamma_k = 1, so no step happens before t = 1
    RngStream rng(5);
    const PathSample path = simulate_scaled_path(model, 40, 0.9, 0.1, rng);
    for (double v : path.values) REQUIRE(v == 0.4);
}

TEST_CASE("paths are bit-identical for identical seeds") {
    const ScaledModel model(20, 20.0, LatticeLaw(Explicit{{0.5, 0.0, 0.5}}),
                            constant_family(LatticeLaw(Dirac{1}), LatticeLaw(Poisson{1.0})), 1.0,
                            1.0);
    RngStream a = RngStream::derive(88, 7), b = RngStream::derive(88, 7);
    const PathSample pa = simulate_scaled_path(model, 20, 1.0, 0.05, a, 7);
    const PathSample pb = simulate_scaled_path(model, 20, 1.0, 0.05, b, 7);
    REQUIRE(pa.times == pb.times);
    REQUIRE(pa.values == pb.values);
    REQUIRE(pa.seed == pb.seed);
}

TEST_CASE("transition pgf closed forms") {
    SECTION("absorbing zero state") {
        const ScaledModel model(10, 10.0, LatticeLaw(Poisson{1.0}),
                                constant_family(LatticeLaw(Poisson{1.0}), LatticeLaw(Dirac{0})),
                                1.0, 1.0);
        for (double s : {0.0, 0.4, 1.0}) REQUIRE(transition_pgf(model, 0, s) == 1.0);
    }
    SECTION("identity model transitions are monomials") {
        const ScaledModel model = identity_model(10);
        for (std::int64_t i : {1, 3, 8})
            for (double s : {0.2, 0.7})
                REQUIRE(transition_pgf(model, i, s) ==
                        Catch::Approx(std::pow(s, double(i))).margin(1e-12));
    }
}

TEST_CASE("transition pgf matches a Monte Carlo pgf estimate") {
    const ScaledModel model(10, 10.0, LatticeLaw(Poisson{0.9}),
                            constant_family(LatticeLaw(Poisson{1.0}), LatticeLaw(Poisson{0.5})),
                            0.9, 1.0);
    RngStream rng(6);
    const double s = 0.8;
    const int n = 100000;
    std::vector<double> draws(n);
    for (int i = 0; i < n; ++i)
        draws[static_cast<std::size_t>(i)] = std::pow(s, double(cbp_step(model, 5, rng)));
    const auto stats = testutil::summarize(draws);
    REQUIRE(std::abs(stats.mean - transition_pgf(model, 5, s)) < 3.0 * stats.se);
}

TEST_CASE("one-step law matches the expanded transition pgf") {
    const ScaledModel base(7, 7.0, LatticeLaw(Explicit{{0.4, 0.3, 0.3}}),
                           constant_family(LatticeLaw(Bernoulli{0.5}), LatticeLaw(Poisson{0.8})),
                           0.9, 1.0);
    const auto exact = transition_pmf_oracle(base, 4, 512);
    for (bool fast : {true, false}) {
        ScaledModel model = base;
        model.offspring_fast_path = fast;
        RngStream rng(fast ? 7u : 8u);
        const auto emp = testutil::empirical_pmf([&]() { return cbp_step(model, 4, rng); }, 100000,
                                                 exact.size());
        REQUIRE(testutil::tv_distance(emp, exact) < 0.02);
    }
}

TEST_CASE("chain states never go negative and stay integral") {
    const ScaledModel model(15, 15.0, LatticeLaw(Explicit{{0.3, 0.4, 0.3}}),
                            constant_family(LatticeLaw(Bernoulli{0.9}), LatticeLaw(Poisson{1.0})),
                            1.0, 1.0);
    RngStream rng(9);
    std::int64_t z = 15;
    for (int i = 0; i < 2000; ++i) {
        z = cbp_step(model, z, rng);
        REQUIRE(z >= 0);
    }
}

TEST_CASE("state overflow is detected, not wrapped") {
    const ScaledModel model(10, 10.0, LatticeLaw(Dirac{2}),
                            constant_family(LatticeLaw(Dirac{1}), LatticeLaw(Dirac{0})), 2.0, 1.0);
    RngStream rng(10);
    std::int64_t z = std::int64_t{1} << 61;
    REQUIRE_THROWS_AS(
        [&] {
            for (int i = 0; i < 4; ++i) z = cbp_step(model, z, rng);
        }(),
        NumericError);
}

TEST_CASE("model validation") {
    REQUIRE_THROWS_AS(ScaledModel(0, 1.0, LatticeLaw(Dirac{1}),
                                  constant_family(LatticeLaw(Dirac{1}), LatticeLaw(Dirac{0})), 1.0,
                                  1.0),
                      ValidationError);
    REQUIRE_THROWS_AS(ScaledModel(5, -1.0, LatticeLaw(Dirac{1}),
                                  constant_family(LatticeLaw(Dirac{1}), LatticeLaw(Dirac{0})), 1.0,
                                  1.0),
                      ValidationError);
    REQUIRE_THROWS_AS(ScaledModel(5, 5.0, LatticeLaw(Dirac{1}),
                                  constant_family(LatticeLaw(Dirac{1}), LatticeLaw(Dirac{0})), 0.0,
                                  1.0),
                      ValidationError);
}
