#include "twm/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "twm/rng.hpp"

namespace twm {

namespace {

void project(Vec& delta, std::span<const double> reserves) {
    for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] = std::max(delta[i], -reserves[i]);
}

struct StartResult {
    Vec delta;
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    double residual = 0.0;
};

StartResult ascend(const DiscountFunction& f, const PoolState& state, const WeightVector& wstar,
                   Vec x, const SolverConfig& cfg) {
    project(x, state.reserves);
    auto ctx_at = [&](const Vec& d) { return make_context(state, wstar, d); };
    double fx = eval_discount(f, ctx_at(x));

    StartResult out;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        const Vec g = grad_discount_delta(f, ctx_at(x));

        Vec probe = x;
        for (std::size_t i = 0; i < probe.size(); ++i) probe[i] += g[i];
        project(probe, state.reserves);
        double residual = 0.0;
        for (std::size_t i = 0; i < probe.size(); ++i)
            residual = std::max(residual, std::abs(probe[i] - x[i]));
        if (residual <= cfg.gradient_tolerance) {
            out.delta = std::move(x);
            out.objective = fx;
            out.converged = true;
            out.iterations = it;
            out.residual = residual;
            return out;
        }

        // Armijo backtracking along the projected arc. The test is kept in
        // difference form with a strict gain: written as
        // fy >= fx + c * directional, the right side rounds to fx once
        // c * directional drops below half an ulp of fx, and the solver then
        // accepts zero-gain lateral moves around the peak until the
        // iteration budget dies.
        double step = cfg.initial_step;
        bool accepted = false;
        while (step > 1e-18) {
            Vec y = x;
            for (std::size_t i = 0; i < y.size(); ++i) y[i] += step * g[i];
            project(y, state.reserves);
            if (y == x) break;  // no smaller step moves either
            double directional = 0.0;
            for (std::size_t i = 0; i < y.size(); ++i) directional += g[i] * (y[i] - x[i]);
            const double fy = eval_discount(f, ctx_at(y));
            const double gain = fy - fx;
            if (std::isfinite(fy) && gain > 0.0 && gain >= cfg.armijo_constant * directional) {
                if (fy < fx)
                    throw Error("solver: ascent assertion tripped (objective decreased)");
                x = std::move(y);
                fx = fy;
                accepted = true;
                break;
            }
            step *= cfg.backtracking_factor;
        }
        if (!accepted) {
            // No machine-representable step along the arc improves F. At the
            // roundoff floor of the objective that is convergence (one more
            // correct digit does not exist in double precision); a larger
            // residual is a genuine stall on a nonsmooth or ill-scaled F.
            const double floor = std::sqrt(std::numeric_limits<double>::epsilon()) *
                                 (1.0 + std::abs(fx) + norm_inf(x));
            out.converged = residual <= std::max(cfg.gradient_tolerance, floor);
            out.delta = std::move(x);
            out.objective = fx;
            out.iterations = it + 1;
            out.residual = residual;
            return out;
        }
    }
    out.residual = verify_stationarity(f, state, wstar, x);
    out.delta = std::move(x);
    out.objective = fx;
    out.converged = false;
    out.iterations = cfg.max_iterations;
    return out;
}

}  // namespace

SolveResult solve_arbitrage(const DiscountFunction& f, const PoolState& state,
                            const WeightVector& wstar, const SolverConfig& cfg) {
    validate(state);
    if (wstar.size() != state.size()) throw Error("solver: target weight width mismatch");
    if (!(cfg.backtracking_factor > 0.0 && cfg.backtracking_factor < 1.0))
        throw Error("solver: backtracking_factor must lie in (0,1)");

    Rng rng(Rng::derive(cfg.seed, 0x736f6c7665ull));
    const int starts = std::max(1, cfg.starts);

    std::vector<StartResult> runs;
    runs.reserve(starts);
    for (int s = 0; s < starts; ++s) {
        Vec x0(state.size(), 0.0);
        if (s > 0) {
            for (std::size_t i = 0; i < x0.size(); ++i)
                x0[i] = -state.reserves[i] + rng.u01() * (2.0 * state.reserves[i] + 1.0);
        }
        runs.push_back(ascend(f, state, wstar, std::move(x0), cfg));
    }

    // best objective wins, ties go to the lowest start index
    std::size_t best = 0;
    for (std::size_t s = 1; s < runs.size(); ++s)
        if (runs[s].objective > runs[best].objective) best = s;

    SolveResult result;
    result.delta_hat = runs[best].delta;
    result.objective = runs[best].objective;
    result.converged = runs[best].converged;
    result.stationarity_residual = runs[best].residual;
    for (const auto& r : runs) result.iterations += r.iterations;

    const double obj_tol = 1e-9 * (1.0 + std::abs(result.objective));
    const double pt_tol = 1e-6 * (1.0 + norm_inf(result.delta_hat));
    for (std::size_t s = 0; s < runs.size(); ++s) {
        if (s == best) continue;
        if (std::abs(runs[s].objective - result.objective) <= obj_tol) {
            double dist = 0.0;
            for (std::size_t i = 0; i < result.delta_hat.size(); ++i)
                dist = std::max(dist, std::abs(runs[s].delta[i] - result.delta_hat[i]));
            if (dist > pt_tol) result.unique = false;
        }
    }

    const Vec held = add(state.reserves, result.delta_hat);
    if (dot(state.prices, held) > 0.0) {
        const WeightVector w = mark_weights(state.prices, held);
        result.achieved_weights.assign(w.values().begin(), w.values().end());
    }
    return result;
}

double verify_stationarity(const DiscountFunction& f, const PoolState& state,
                           const WeightVector& wstar, std::span<const double> delta_hat) {
    const EvalContext ctx = make_context(state, wstar, delta_hat);
    const Vec g = grad_discount_delta(f, ctx);
    double residual = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double moved = std::max(delta_hat[i] + g[i], -state.reserves[i]);
        residual = std::max(residual, std::abs(moved - delta_hat[i]));
    }
    return residual;
}

}  // namespace twm
