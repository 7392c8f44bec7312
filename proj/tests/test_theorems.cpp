#include <doctest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "twm/theorems.hpp"

using namespace twm;

namespace {

/// Segment context for the two-asset unit pool R = (1,1) at 8f = 1.
SegmentContext unit_ray_ctx() {
    SegmentContext ctx;
    ctx.target_weights = {0.5, 0.5};
    ctx.reserves = {1.0, 1.0};
    ctx.delta = {0.0, 0.0};
    ctx.fee_rate = 0.125;
    return ctx;
}

SegmentSpec segment(Vec p1, Vec p2) {
    SegmentSpec s;
    s.p1 = std::move(p1);
    s.p2 = std::move(p2);
    return s;
}

}  // namespace

TEST_SUITE("theorems") {

TEST_CASE("line integral of a zero field is exactly zero") {
    const ConstantZero f;
    const auto ctx = unit_ray_ctx();
    CHECK(gradient_line_integral(f, ctx, segment({1.0, 1.0}, {4.0, 2.0})) == 0.0);
}

TEST_CASE("line integral recovers the log difference below the clip") {
    const ClippedLogRay f(2.0, 1.0);
    const auto ctx = unit_ray_ctx();
    // p.R runs 2 -> 4, entirely below the clip threshold 2e: the integral
    // must equal F(p2) - F(p1) = ln 2.
    const double integral = gradient_line_integral(f, ctx, segment({1.0, 1.0}, {2.0, 2.0}));
    CHECK(std::abs(integral - std::log(2.0)) <= 1e-10);

    // Kink refinement has nothing to do on a smooth piece.
    SegmentSpec raw = segment({1.0, 1.0}, {2.0, 2.0});
    raw.refine_kinks = false;
    CHECK(std::abs(gradient_line_integral(f, ctx, raw) - std::log(2.0)) <= 1e-10);
}

TEST_CASE("line integral across the clip needs kink refinement") {
    const ClippedLogRay f(2.0, 1.0);
    const auto ctx = unit_ray_ctx();
    // p.R runs 2 -> 12 across the clip at 2e; with the kink split the
    // integral still equals F(p2) - F(p1) = 1 - 0.
    const double integral = gradient_line_integral(f, ctx, segment({1.0, 1.0}, {6.0, 6.0}));
    CHECK(std::abs(integral - 1.0) <= 1e-8);

    SegmentSpec raw = segment({1.0, 1.0}, {6.0, 6.0});
    raw.refine_kinks = false;
    CHECK_THROWS_AS(gradient_line_integral(f, ctx, raw), QuadratureAcrossKink);
}

TEST_CASE("line integral matches the quadratic's value difference") {
    const CanonicalQuadratic f(twmtest::stiffness_2i());
    SegmentContext ctx;
    ctx.target_weights = {0.5, 0.5};
    ctx.reserves = {3.0, 1.0};
    ctx.delta = {0.5, -0.25};
    ctx.fee_rate = 0.1;
    const SegmentSpec seg = segment({1.0, 1.0}, {2.5, 0.75});

    const double integral = gradient_line_integral(f, ctx, seg);
    const EvalContext c1{seg.p1, ctx.target_weights, ctx.reserves, ctx.delta, ctx.fee_rate};
    const EvalContext c2{seg.p2, ctx.target_weights, ctx.reserves, ctx.delta, ctx.fee_rate};
    const double diff = f.value(c2) - f.value(c1);
    CHECK(std::abs(integral - diff) <= 1e-9 * (1.0 + std::abs(diff)));

    // At delta = 0 the quadratic's price gradient vanishes identically.
    SegmentContext flat = ctx;
    flat.delta = {0.0, 0.0};
    CHECK(gradient_line_integral(f, flat, seg) == 0.0);
}

TEST_CASE("growth bound: closed form vs quadrature, spot value one") {
    const auto ctx = unit_ray_ctx();
    // 8 f ln(p2.R / p1.R) with p2 = e p1: exactly one unit of growth.
    const BoundIntegral b =
        bound_line_integral(ctx, segment({1.0, 1.0}, {std::numbers::e, std::numbers::e}));
    CHECK(std::abs(b.closed_form - 1.0) <= 1e-10);
    CHECK(std::abs(b.quadrature - b.closed_form) <= 1e-8);

    // Degenerate segment: both sides vanish.
    const BoundIntegral z = bound_line_integral(ctx, segment({1.0, 1.0}, {1.0, 1.0}));
    CHECK(z.closed_form == 0.0);
    CHECK(z.quadrature == 0.0);

    SegmentContext hollow = ctx;
    hollow.reserves = {0.0, 0.0};
    CHECK_THROWS_AS(bound_line_integral(hollow, segment({1.0, 1.0}, {2.0, 2.0})),
                    AllReservesZero);
}

TEST_CASE("domination gap is tight where the condition is satisfied") {
    // Below its clip the log ray meets the growth condition with equality,
    // so F(p2) - F(p1) minus the bound is zero up to quadrature error.
    const ClippedLogRay f(2.0, 1.0);
    const auto ctx = unit_ray_ctx();
    const Vec starts[] = {{1.0, 1.0}, {0.5, 1.2}, {1.3, 0.4}};
    const Vec ends[] = {{2.0, 2.0}, {1.1, 1.6}, {2.0, 1.5}};
    for (std::size_t k = 0; k < 3; ++k) {
        const EvalContext a{starts[k], ctx.target_weights, ctx.reserves, ctx.delta, ctx.fee_rate};
        const EvalContext b{ends[k], ctx.target_weights, ctx.reserves, ctx.delta, ctx.fee_rate};
        const double diff = f.value(b) - f.value(a);
        const BoundIntegral bound = bound_line_integral(ctx, segment(starts[k], ends[k]));
        CHECK(diff - bound.closed_form >= -1e-8);
        CHECK(std::abs(diff - bound.closed_form) <= 1e-12);
    }
}

TEST_CASE("witness search on the zero discount: frozen oracle") {
    const ConstantZero f;
    const auto ctx = unit_ray_ctx();
    const DominationSearchResult r = find_gradient_domination_witness(f, ctx, {1.0, 1.0});

    // Budget = (1 - F(p1)) + slack = 1.5; each doubling adds 8 f ln 2 = ln 2,
    // so the race ends at k = 3 (scale 8).
    CHECK(r.premise_value == 0.0);
    REQUIRE(r.trace.size() == 3);
    CHECK(r.trace.back().doublings == 3);
    CHECK(r.trace.back().scale == 8.0);
    CHECK(r.trace.back().budget == 1.5);
    CHECK(r.trace.back().bound_growth > 1.5);
    CHECK(r.grid_points == 65);

    // The most negative margin sits at p1 itself: 0 - 8 f R_i / (p.R) = -1/2.
    CHECK(r.witness.point[0] == 1.0);
    CHECK(r.witness.point[1] == 1.0);
    CHECK(r.witness.margin == -0.5);
    CHECK(r.witness.verified_margin == -0.5);  // FD of a constant is exactly zero
    CHECK(r.witness.verification_residual == 0.0);
    CHECK(r.witness.kind == WitnessKind::GradientDominationViolation);
}

TEST_CASE("witness search on the clipped log ray lands above the clip") {
    const ClippedLogRay f(2.0, 1.0);
    const auto ctx = unit_ray_ctx();

    // Below the clip the margin is exactly zero, so the witness must sit on
    // the flat branch. First grid point past the clip: t = 16/64, where
    // p = (2.75, 2.75) and the margin is -8 f R_i / (p.R) = -2/11.
    const DominationSearchResult r = find_gradient_domination_witness(f, ctx, {1.0, 1.0});
    const double s = dot(r.witness.point, ctx.reserves);
    CHECK(s > f.clip_threshold(ctx.fee_rate));
    CHECK(std::abs(r.witness.point[0] - 2.75) <= 1e-12);
    CHECK(std::abs(r.witness.margin - (-2.0 / 11.0)) <= 1e-12);
    CHECK(r.witness.margin < -1e-10);
    CHECK(r.witness.verified_margin < -1e-10);
    CHECK(r.witness.verification_residual <= 1e-6);

    // Hand check at p = (3,3): the flat branch against 8 f R_i / (p.R).
    const Vec p{3.0, 3.0};
    const EvalContext at{p, ctx.target_weights, ctx.reserves, ctx.delta, ctx.fee_rate};
    const Vec g = f.price_gradient(at);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(std::abs((g[i] - 8.0 * at.fee_rate * ctx.reserves[i] / 6.0) - (-1.0 / 6.0)) <=
              1e-15);
}

TEST_CASE("witness search on the quadratic at rest: frozen margin") {
    const CanonicalQuadratic f(twmtest::stiffness_2i());
    SegmentContext ctx;
    ctx.target_weights = {0.5, 0.5};
    ctx.reserves = {3.0, 1.0};
    ctx.delta = {0.0, 0.0};  // price gradient vanishes: margins are pure bound
    ctx.fee_rate = 0.1;

    const DominationSearchResult r = find_gradient_domination_witness(f, ctx, {1.0, 1.0});
    CHECK(r.witness.point[0] == 1.0);
    CHECK(r.witness.component == 0);  // the heavy reserve violates hardest
    CHECK(std::abs(r.witness.margin - (-0.6)) <= 1e-15);  // -8 f R_1/(p.R) = -0.8*3/4
    CHECK(r.witness.verification_residual <= 1e-12);
}

TEST_CASE("witness search enforces its premises") {
    const auto ctx = unit_ray_ctx();

    // Unbounded growth breaks the F <= 1 premise immediately.
    const DslDiscount unbounded("ln(1 + dot(p, R))");  // ln 3 > 1 at p1
    CHECK_THROWS_AS(find_gradient_domination_witness(unbounded, ctx, {1.0, 1.0}),
                    PremiseFailure);

    // The race needs a positive fee rate.
    SegmentContext feeless = ctx;
    feeless.fee_rate = 0.0;
    CHECK_THROWS_AS(find_gradient_domination_witness(ConstantZero{}, feeless, {1.0, 1.0}),
                    PremiseFailure);

    // A fee this small cannot outrun the budget within the doubling cap.
    SegmentContext slow = ctx;
    slow.fee_rate = 0.001;
    CHECK_THROWS_AS(find_gradient_domination_witness(ConstantZero{}, slow, {1.0, 1.0}),
                    SearchBudgetExceeded);
}

TEST_CASE("witness search succeeds across seeded configurations and families") {
    const ConstantZero zero;
    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const ClippedLogRay ray(2.0, 1.0);
    const DiscountFunction* families[] = {&zero, &quad, &ray};

    twm::Rng rng(0x77697431u);
    for (int rep = 0; rep < 10; ++rep) {
        SegmentContext ctx;
        ctx.target_weights = {0.5, 0.5};
        ctx.reserves = {rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)};
        ctx.delta = {0.0, 0.0};
        ctx.fee_rate = rng.uniform(0.05, 0.4);
        const Vec p1 = {rng.log_uniform(0.5, 2.0), rng.log_uniform(0.5, 2.0)};

        for (const DiscountFunction* f : families) {
            const DominationSearchResult r = find_gradient_domination_witness(*f, ctx, p1);
            CHECK(r.witness.margin < -1e-10);
            CHECK(r.witness.verified_margin < -1e-10);
            CHECK(r.witness.verification_residual <= 1e-6);
            CHECK(r.premise_value <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("euler residual per family") {
    const auto ctx = unit_ray_ctx();
    const Vec ones{1.0, 1.0};

    const ConstantZero zero;
    const EvalContext at{ones, ctx.target_weights, ctx.reserves, ctx.delta, ctx.fee_rate};
    CHECK(euler_residual(zero, at) == 0.0);

    // ln(p.R) pushes exactly one unit through the Euler product.
    const DslDiscount logray("ln(dot(p, R))");
    const Vec p3{2.0, 0.5};
    const Vec w3{0.5, 0.5};
    const Vec r3{1.0, 2.0};
    const Vec d3{0.0, 0.0};
    const EvalContext at3{p3, w3, r3, d3, 0.1};
    CHECK(std::abs(euler_residual(logray, at3) - 1.0) <= 1e-10);

    // Below the clip the hand-written ray pushes 8f through.
    const ClippedLogRay ray(2.0, 1.0);
    CHECK(std::abs(euler_residual(ray, at) - 1.0) <= 1e-12);  // 8 * 0.125

    SamplerConfig cfg;
    cfg.samples = 100;
    cfg.seed = 3;
    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const EulerReport good = check_euler(quad, cfg);
    CHECK(good.pass);
    CHECK(good.max_scaled_residual <= 1e-12);
    CHECK(good.samples_used == 100);

    const EulerReport bad = check_euler(ray, cfg);
    CHECK_FALSE(bad.pass);
    CHECK(bad.max_scaled_residual > 1e-3);
}

TEST_CASE("numeraire invariance of the pool value") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();
    const std::vector<double> lambdas = {0.5, 2.0, 10.0, 100.0};

    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const NumeraireReport good = check_numeraire(quad, s, w, Vec{0.0, 0.0}, lambdas);
    CHECK(good.pass);
    CHECK(good.max_rel_error <= 1e-10);
    REQUIRE(good.rows.size() == 4);
    CHECK(good.rows[0].lambda == 0.5);
    CHECK(good.rows[3].lambda == 100.0);
    for (const auto& row : good.rows) CHECK(row.base_value == good.rows[0].base_value);

    // A price-level-sensitive discount breaks degree-1 homogeneity.
    const DslDiscount leveled("ln(dot(p, R))");
    PoolState s3 = s;
    s3.prices = {2.0, 0.5};
    s3.reserves = {1.0, 2.0};  // p.R = 3 keeps 1 + F positive at all lambdas here
    const NumeraireReport bad =
        check_numeraire(leveled, s3, w, Vec{0.0, 0.0}, std::vector<double>{0.5, 2.0});
    CHECK_FALSE(bad.pass);
    CHECK(bad.max_rel_error > 1e-3);

    CHECK_THROWS_AS(check_numeraire(quad, s, w, Vec{0.0, 0.0}, std::vector<double>{-1.0}),
                    ConfigError);
}

TEST_CASE("inner product identity: zero for invariant families") {
    const PoolState s = twmtest::demo_state();
    const WeightVector w = twmtest::half_half();

    const ConstantZero zero;
    CHECK(inner_product_residual(zero, s, w, Vec{0.0, 0.0}) == 0.0);

    SamplerConfig cfg;
    cfg.samples = 100;
    cfg.seed = 11;
    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const InnerProductReport rep = check_inner_product(quad, cfg);
    CHECK(rep.pass);
    CHECK(rep.max_scaled_residual <= 1e-9);
    CHECK(rep.samples_used == 100);
}

TEST_CASE("inner product residual measures the euler defect exactly") {
    // For F = ln(p.R):  p.grad V - V = -(p.R) (p.grad F) / (1+F)^2 with
    // p.grad F = 1, so the scaled residual has a closed form.
    PoolState s;
    s.prices = {2.0, 0.5};
    s.reserves = {1.0, 2.0};
    s.lent = {0.0, 0.0};
    s.fee_rate = 0.1;
    const WeightVector w = twmtest::half_half();
    const DslDiscount logray("ln(dot(p, R))");

    const double S = 3.0;
    const double F = std::log(S);
    const double V = S / (1.0 + F);
    const double expected = (S / ((1.0 + F) * (1.0 + F))) / (1.0 + std::abs(V));
    const double got = inner_product_residual(logray, s, w, Vec{0.0, 0.0});
    CHECK(std::abs(got - expected) <= 1e-12);
    CHECK(got > 1e-2);  // far outside the identity tolerance
}

TEST_CASE("gradient consistency across families") {
    SamplerConfig cfg;
    cfg.samples = 60;
    cfg.seed = 29;

    const ConstantZero zero;
    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const ClippedLogRay ray(2.0, 1.0);
    const DslDiscount dsl("ln(1 + dot(p, R))");
    const DiscountFunction* families[] = {&zero, &quad, &ray, &dsl};
    for (const DiscountFunction* f : families) {
        const GradientConsistencyReport r = check_gradient_consistency(*f, cfg);
        CHECK_MESSAGE(r.pass, f->name(), ": max rel error ", r.max_rel_error);
        CHECK(r.samples_used > 0);
        CHECK(r.max_rel_error <= 1e-6);
    }
}

TEST_CASE("gradient theorem check over sampled segments") {
    SamplerConfig cfg;
    cfg.samples = 20;
    cfg.seed = 31;

    const ConstantZero zero;
    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const ClippedLogRay ray(2.0, 1.0);
    const DslDiscount dsl("ln(1 + dot(p, R))");
    const DiscountFunction* families[] = {&zero, &quad, &ray, &dsl};
    for (const DiscountFunction* f : families) {
        const GradientTheoremReport r = check_gradient_theorem(*f, cfg);
        CHECK_MESSAGE(r.pass, f->name(), ": max scaled error ", r.max_scaled_error);
        CHECK(r.segments_used == 20);
        CHECK(r.max_bound_disagreement <= 1e-8);
    }

    // Deterministic in the seed.
    const GradientTheoremReport a = check_gradient_theorem(ray, cfg);
    const GradientTheoremReport b = check_gradient_theorem(ray, cfg);
    CHECK(a.max_scaled_error == b.max_scaled_error);
}

TEST_CASE("uniform shrinkage is falsified on the whole c grid") {
    const WeightVector w = twmtest::half_half();
    SamplerConfig cfg;
    cfg.seed = 37;
    const std::vector<double> grid = {0.01, 0.1, 0.5, 0.9, 0.99};

    const CanonicalQuadratic quad(twmtest::stiffness_2i());
    const ShrinkageReport r = falsify_uniform_shrinkage(quad, w, grid, cfg);
    CHECK(r.falsified);
    REQUIRE(r.rows.size() == 5);
    REQUIRE(r.witnesses.size() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(r.rows[k].c == grid[k]);
        CHECK(r.rows[k].component_margin > 1e-10);
        CHECK(r.rows[k].aggregate_new > r.rows[k].aggregate_bound);
        CHECK(r.rows[k].euler_residual <= 1e-8);
        CHECK(r.witnesses[k].margin > 1e-10);
        CHECK(r.witnesses[k].verified_margin > 1e-10);
        CHECK(r.witnesses[k].verification_residual <= 1e-6);
        CHECK(r.witnesses[k].kind == WitnessKind::UniformShrinkageViolation);
    }
    CHECK(r.zero_state_tries >= 1);
    CHECK(r.zero_state_tries <= 200);

    // The zero discount switches off everywhere; same conclusion.
    const ShrinkageReport z = falsify_uniform_shrinkage(ConstantZero{}, w, grid, cfg);
    CHECK(z.falsified);
    CHECK(z.zero_state_tries == 1);
}

TEST_CASE("shrinkage hand oracle: the aggregate pins two point one") {
    // At a zero-discount state with p = (1,1), R = (1,1), f = 0.1, l = (1,0):
    // p.grad V = p.R + f p.l = 2.1, strictly above c * 2 for every c < 1.
    PoolState s;
    s.prices = {1.0, 1.0};
    s.reserves = {1.0, 1.0};
    s.lent = {1.0, 0.0};
    s.fee_rate = 0.1;
    const WeightVector w = twmtest::half_half();
    const ConstantZero zero;
    const Vec g = pool_value_gradient(s, zero, w, Vec{0.0, 0.0});
    CHECK(std::abs(dot(s.prices, g) - 2.1) <= 1e-15);
}

TEST_CASE("shrinkage falsifier enforces its premises") {
    const WeightVector w = twmtest::half_half();
    SamplerConfig cfg;
    cfg.seed = 37;

    // c outside (0,1) is a configuration error.
    CHECK_THROWS_AS(
        falsify_uniform_shrinkage(ConstantZero{}, w, std::vector<double>{1.0}, cfg),
        ConfigError);
    CHECK_THROWS_AS(
        falsify_uniform_shrinkage(ConstantZero{}, w, std::vector<double>{0.0}, cfg),
        ConfigError);

    // The log ray essentially never sits at F = 0 under random states.
    const ClippedLogRay ray(2.0, 1.0);
    CHECK_THROWS_AS(
        falsify_uniform_shrinkage(ray, w, std::vector<double>{0.5}, cfg), NoZeroState);
}

}  // TEST_SUITE
