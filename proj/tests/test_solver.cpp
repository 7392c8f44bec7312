#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "twm/rng.hpp"
#include "twm/sampling.hpp"
#include "twm/solver.hpp"

using namespace twm;

TEST_SUITE("solver") {

TEST_CASE("closed-form rebalance on the demo pool") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const CanonicalQuadratic f(twmtest::stiffness_2i());

    const SolveResult r = solve_arbitrage(f, s, w);
    REQUIRE(r.delta_hat.size() == 2);
    CHECK(r.converged);
    CHECK(r.unique);
    CHECK(std::abs(r.delta_hat[0] - (-1.0)) <= 1e-6);
    CHECK(std::abs(r.delta_hat[1] - 1.0) <= 1e-6);
    CHECK(std::abs(r.objective - 2.0) <= 1e-9);
    REQUIRE(r.achieved_weights.size() == 2);
    CHECK(std::abs(r.achieved_weights[0] - 0.5) <= 1e-7);
    CHECK(std::abs(r.achieved_weights[1] - 0.5) <= 1e-7);
    CHECK(r.stationarity_residual <= 1e-8);
}

TEST_CASE("a pool already at target stays put") {
    PoolState s = twmtest::demo_state();
    s.reserves = {1.0, 1.0};  // p=(1,1): marked weights are the target already
    const WeightVector w = twmtest::half_half();
    const CanonicalQuadratic f(twmtest::stiffness_2i());

    const SolveResult r = solve_arbitrage(f, s, w);
    CHECK(r.converged);
    CHECK(std::abs(r.delta_hat[0]) <= 1e-7);
    CHECK(std::abs(r.delta_hat[1]) <= 1e-7);
    CHECK(std::abs(r.objective) <= 1e-12);
}

TEST_CASE("flat objectives are flagged as non-unique") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const ConstantZero f;

    const SolveResult r = solve_arbitrage(f, s, w);
    CHECK(r.converged);
    CHECK(r.objective == 0.0);
    CHECK_FALSE(r.unique);  // every feasible point ties
}

TEST_CASE("solver tracks the closed form across random instances") {
    twm::Rng rng(0x736f6c31u);
    StateSamplerOptions opt;
    opt.dimension = 3;
    SolverConfig cfg;
    for (int rep = 0; rep < 100; ++rep) {
        const PoolState s = sample_state(rng, opt);
        const WeightVector w = sample_simplex(rng, opt);
        const SymMatrix b = sample_spd_matrix(rng, 3);
        const CanonicalQuadratic f(b);
        cfg.seed = rng.next_u64();

        const EvalContext ctx = make_context(s, w, Vec(3, 0.0));
        const Vec dstar = CanonicalQuadratic::preserving_rebalance(ctx);

        const SolveResult r = solve_arbitrage(f, s, w, cfg);
        CHECK(r.converged);
        const double scale = 1.0 + norm_inf(dstar);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(std::abs(r.delta_hat[i] - dstar[i]) <= 1e-6 * scale);
        // The optimum is the value-preserving rebalance, so the achieved
        // weights are the target weights.
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(std::abs(r.achieved_weights[i] - w[i]) <= 1e-6);
        // Ascent from delta = 0 never loses ground.
        CHECK(r.objective >= f.value(ctx) - 1e-12);
    }
}

TEST_CASE("stationarity certificate") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const CanonicalQuadratic f(twmtest::stiffness_2i());

    CHECK(verify_stationarity(f, s, w, Vec{-1.0, 1.0}) <= 1e-12);
    CHECK(verify_stationarity(f, s, w, Vec{0.0, 0.0}) > 0.1);  // gradient (-2,2) projects freely
    const ConstantZero zero;
    CHECK(verify_stationarity(zero, s, w, Vec{0.5, 0.5}) == 0.0);
}

TEST_CASE("iterates respect the feasible box") {
    // Maximizing -(R+delta).(R+delta) drives the optimum to the corner
    // delta = -R; the projection must hold every iterate inside the box.
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const DslDiscount f("0 - dot(R + delta, R + delta)");

    const SolveResult r = solve_arbitrage(f, s, w);
    CHECK(r.converged);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(r.delta_hat[i] >= -s.reserves[i] - 1e-12);
        CHECK(std::abs(r.delta_hat[i] - (-s.reserves[i])) <= 1e-6 * (1.0 + s.reserves[i]));
    }
    CHECK(std::abs(r.objective) <= 1e-10);
    // All reserves sold: the marked weights are undefined at the optimum.
    CHECK(r.achieved_weights.empty());
}

TEST_CASE("iteration budget is respected") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const CanonicalQuadratic f(twmtest::stiffness_2i());
    SolverConfig cfg;
    cfg.max_iterations = 1;
    cfg.starts = 1;
    const SolveResult r = solve_arbitrage(f, s, w, cfg);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations <= 1);
}

}  // TEST_SUITE
