#include "twm/conditions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "twm/rng.hpp"

namespace twm {

namespace {

constexpr std::uint64_t kC1Salt = 0x6331u;
constexpr std::uint64_t kC2Salt = 0x6332u;

}  // namespace

C1Report check_c1(const DiscountFunction& f, const SamplerConfig& cfg) {
    C1Report report;
    report.seed = cfg.seed;
    report.reading = f.c1_reading();

    Rng rng(Rng::derive(cfg.seed, kC1Salt));
    StateSamplerOptions opts;
    opts.dimension = cfg.dimension;

    double worst = 0.0;
    for (int k = 0; k < cfg.samples; ++k) {
        PoolState state = sample_state(rng, opts);
        WeightVector wstar = sample_simplex(rng, opts);
        if (report.reading == C1Reading::Weak) {
            pin_to_target(state, wstar, dot(state.prices, state.reserves));
        }
        const Vec zero(state.size(), 0.0);
        EvalContext ctx{state.prices, wstar.values(), state.reserves, zero, state.fee_rate};
        worst = std::max(worst, std::abs(f.value(ctx)));
    }
    report.max_abs_residual = worst;
    report.samples_used = cfg.samples;
    report.pass = worst <= report.tolerance;
    return report;
}

C2Report check_c2_concavity(const DiscountFunction& f, const PoolState& state,
                            const WeightVector& wstar, const SamplerConfig& cfg) {
    C2Report report;
    report.seed = cfg.seed;

    Rng rng(Rng::derive(cfg.seed, kC2Salt));

    // Midpoint concavity over the feasible box: for sampled feasible a, b
    // require F((a+b)/2) >= (F(a) + F(b)) / 2 - tol.  For continuous F this
    // is equivalent to concavity; any strictly positive violation below is a
    // genuine counterexample regardless of continuity.
    double worst = 0.0;
    for (int k = 0; k < cfg.samples; ++k) {
        const Vec a = sample_feasible_delta(rng, state.reserves);
        const Vec b = sample_feasible_delta(rng, state.reserves);
        Vec mid(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) mid[i] = 0.5 * (a[i] + b[i]);

        const EvalContext ca{state.prices, wstar.values(), state.reserves, a, state.fee_rate};
        const EvalContext cb{state.prices, wstar.values(), state.reserves, b, state.fee_rate};
        const EvalContext cm{state.prices, wstar.values(), state.reserves, mid, state.fee_rate};
        const double gap = 0.5 * (f.value(ca) + f.value(cb)) - f.value(cm);
        worst = std::max(worst, gap);
    }
    report.worst_violation = worst;
    report.samples_used = cfg.samples;
    report.pass = worst <= report.tolerance;
    return report;
}

C3Report check_c3_target(const DiscountFunction& f, const PoolState& state,
                         const WeightVector& wstar, const SolverConfig& cfg) {
    C3Report report;
    report.solve = solve_arbitrage(f, state, wstar, cfg);
    if (report.solve.achieved_weights.empty()) {
        // Degenerate optimum (zero post-trade value); cannot land on w*.
        report.weight_error = std::numeric_limits<double>::infinity();
        report.pass = false;
        return report;
    }
    double err = 0.0;
    for (std::size_t i = 0; i < wstar.size(); ++i) {
        err = std::max(err, std::abs(report.solve.achieved_weights[i] - wstar[i]));
    }
    report.weight_error = err;
    // A flat argmax cannot "achieve" anything: non-uniqueness is a C3 failure
    // even when one of the tied optima happens to sit on the target.
    report.pass = report.solve.converged && report.solve.unique && err <= report.tolerance;
    return report;
}

}  // namespace twm
