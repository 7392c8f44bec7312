#include <doctest.h>

#include <cmath>
#include <string>

#include "support.hpp"
#include "twm/pool.hpp"
#include "twm/rng.hpp"
#include "twm/sampling.hpp"

using namespace twm;

TEST_SUITE("pool") {

TEST_CASE("state validation catches each invariant") {
    PoolState s = twmtest::demo_state();
    CHECK_NOTHROW(validate(s));

    PoolState fee = s;
    fee.fee_rate = 1.5;
    CHECK_THROWS_AS(validate(fee), Error);
    fee.fee_rate = 0.0;  // the fee must be strictly inside (0,1)
    CHECK_THROWS_AS(validate(fee), Error);

    PoolState neg = s;
    neg.reserves[1] = -0.5;
    CHECK_THROWS_AS(validate(neg), Error);

    PoolState price = s;
    price.prices[0] = 0.0;
    CHECK_THROWS_AS(validate(price), Error);

    PoolState width = s;
    width.lent = {1.0};
    CHECK_THROWS_AS(validate(width), Error);

    PoolState empty;
    empty.fee_rate = 0.1;
    CHECK_THROWS_AS(validate(empty), Error);

    // Validation messages index assets the way the scenario files do.
    try {
        validate(neg);
        FAIL("expected a validation error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("2") != std::string::npos);
    }
}

TEST_CASE("weight vector lives on the simplex") {
    CHECK_NOTHROW(WeightVector({0.5, 0.5}));
    CHECK_NOTHROW(WeightVector({0.25, 0.25, 0.5}));
    CHECK_THROWS_AS(WeightVector({0.5, 0.6}), Error);    // sums past one
    CHECK_THROWS_AS(WeightVector({1.2, -0.2}), Error);   // negative entry
    CHECK_THROWS_AS(WeightVector({}), Error);            // empty
}

TEST_CASE("mark weights") {
    const auto w = mark_weights(Vec{1.0, 1.0}, Vec{3.0, 1.0});
    CHECK(w[0] == 0.75);
    CHECK(w[1] == 0.25);
    CHECK_THROWS_AS(mark_weights(Vec{1.0, 1.0}, Vec{0.0, 0.0}), AllReservesZero);
}

TEST_CASE("holdings value is the price-reserve inner product") {
    CHECK(holdings_value(twmtest::demo_state()) == 4.0);
}

TEST_CASE("value breakdown term by term") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const ConstantZero f;
    const Vec zero = {0.0, 0.0};

    const ValueBreakdown v = pool_value(s, f, w, zero);
    CHECK(v.holdings_value == 4.0);
    CHECK(v.discount == 0.0);
    CHECK(v.diluted_value == 4.0);
    CHECK(v.fee_income == doctest::Approx(0.1).epsilon(1e-15));  // 0.1 * (1*1 + 0*1)
    CHECK(v.pool_value == doctest::Approx(4.1).epsilon(1e-15));

    // A positive discount dilutes the holdings term only.
    const DslDiscount one("1");
    const ValueBreakdown vd = pool_value(s, one, w, zero);
    CHECK(vd.diluted_value == 2.0);
    CHECK(vd.pool_value == doctest::Approx(2.1).epsilon(1e-15));
}

TEST_CASE("degenerate discount is rejected") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const Vec zero = {0.0, 0.0};
    const DslDiscount minus_two("0 - 2");  // 1 + F = -1
    CHECK_THROWS_AS(pool_value(s, minus_two, w, zero), DegenerateDiscount);
    const DslDiscount minus_one("0 - 1");  // 1 + F = 0
    CHECK_THROWS_AS(pool_value(s, minus_one, w, zero), DegenerateDiscount);
}

TEST_CASE("gradient with no mechanism is reserves plus fee flow") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const ConstantZero f;
    const Vec g = pool_value_gradient(s, f, w, Vec{0.0, 0.0});
    REQUIRE(g.size() == 2);
    CHECK(g[0] == doctest::Approx(3.1).epsilon(1e-15));  // R_1 + fee * lent_1
    CHECK(g[1] == 1.0);
}

TEST_CASE("analytic gradient matches the finite-difference oracle per family") {
    twm::Rng rng(0x706f6f6cu);
    StateSamplerOptions opt;
    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const ClippedLogRay ray(2.0, 1.0);
    const ConstantZero zero;
    const DiscountFunction* families[] = {&zero, &quad, &ray};

    int compared = 0;
    for (int rep = 0; rep < 60; ++rep) {
        const PoolState s = sample_state(rng, opt);
        const WeightVector w = sample_simplex(rng, opt);
        // Small deltas keep the quadratic's discount out of the degenerate
        // region without biasing the price dependence.
        Vec delta = sample_feasible_delta(rng, s.reserves);
        for (double& d : delta) d *= 0.2;

        for (const DiscountFunction* f : families) {
            ValueBreakdown v;
            try {
                v = pool_value(s, *f, w, delta);
            } catch (const DegenerateDiscount&) {
                continue;
            }
            if (1.0 + v.discount < 0.05) continue;  // FD bumps need headroom
            // Skip states within an FD step of the log ray's clip.
            if (f == &ray) {
                const double total = holdings_value(s);
                if (std::abs(total - ray.clip_threshold(s.fee_rate)) < 1e-3 * total) continue;
            }
            const Vec g = pool_value_gradient(s, *f, w, delta);
            const Vec g_fd = pool_value_gradient_fd(s, *f, w, delta);
            for (std::size_t i = 0; i < g.size(); ++i)
                CHECK(std::abs(g[i] - g_fd[i]) <= 1e-6 * (1.0 + std::abs(g[i])));
            ++compared;
        }
    }
    CHECK(compared > 100);
}

TEST_CASE("finite-difference step validation") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const ConstantZero f;
    const Vec zero = {0.0, 0.0};
    CHECK_THROWS_AS(pool_value_gradient_fd(s, f, w, zero, 1.0), StepTooLarge);
    CHECK_THROWS_AS(pool_value_gradient_fd(s, f, w, zero, 0.0), Error);
    CHECK_THROWS_AS(pool_value_gradient_fd(s, f, w, zero, -0.1), Error);
}

TEST_CASE("make context carries the fee rate") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const Vec zero = {0.0, 0.0};
    const EvalContext ctx = make_context(s, w, zero);
    CHECK(ctx.fee_rate == 0.1);
    CHECK(ctx.prices.size() == 2);
    CHECK(ctx.as_env().fee_rate == 0.1);
}

TEST_CASE("pin to target rewrites reserves onto the target ray") {
    twm::Rng rng(0x70696eu);
    StateSamplerOptions opt;
    for (int rep = 0; rep < 10; ++rep) {
        PoolState s = sample_state(rng, opt);
        const WeightVector w = sample_simplex(rng, opt);
        pin_to_target(s, w, 5.0);
        CHECK(std::abs(holdings_value(s) - 5.0) <= 1e-12 * 5.0);
        const WeightVector marked = mark_weights(s);
        for (std::size_t i = 0; i < marked.size(); ++i)
            CHECK(std::abs(marked[i] - w[i]) <= 1e-12);
    }
}

}  // TEST_SUITE
