#include "twm/theorems.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <string>
#include <utility>

#include "twm/rng.hpp"
#include "twm/sampling.hpp"

namespace twm {

namespace {

constexpr std::uint64_t kEulerSalt = 0x65756cu;
constexpr std::uint64_t kShrinkSalt = 0x736872u;
constexpr std::uint64_t kInnerSalt = 0x696e70u;
constexpr std::uint64_t kConsistencySalt = 0x67636fu;
constexpr std::uint64_t kTheoremSalt = 0x677468u;

std::string fmt(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

Vec segment_point(const Vec& p1, const Vec& p2, double t) {
    Vec p(p1.size());
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = p1[i] + t * (p2[i] - p1[i]);
    return p;
}


EvalContext at_prices(const SegmentContext& ctx, const Vec& prices, const Vec& delta_storage) {
    return EvalContext{prices, ctx.target_weights, ctx.reserves,
                       ctx.delta.empty() ? std::span<const double>(delta_storage)
                                         : std::span<const double>(ctx.delta),
                       ctx.fee_rate};
}

/// Composite Simpson over [a, b] with n subintervals (forced even, >= 2).
template <typename G>
double simpson(const G& g, double a, double b, int n) {
    n = std::max(2, n);
    n += n & 1;
    const double h = (b - a) / n;
    double acc = g(a) + g(b);
    for (int j = 1; j < n; ++j) {
        acc += g(a + j * h) * ((j & 1) ? 4.0 : 2.0);
    }
    return acc * h / 3.0;
}

/// Interior kink parameters, sorted and deduplicated.
std::vector<double> interior_kinks(const DiscountFunction& f, const SegmentContext& ctx,
                                   const SegmentSpec& spec, const Vec& delta_storage) {
    const EvalContext probe = at_prices(ctx, spec.p1, delta_storage);
    std::vector<double> ts = f.segment_kinks(spec.p1, spec.p2, probe);
    std::erase_if(ts, [](double t) { return !(t > 0.0 && t < 1.0); });
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

/// Central-difference price gradient of F itself (relative step).
Vec fd_price_gradient(const DiscountFunction& f, const SegmentContext& ctx, const Vec& prices,
                      const Vec& delta_storage, double step) {
    Vec out(prices.size());
    Vec bumped = prices;
    for (std::size_t i = 0; i < prices.size(); ++i) {
        const double h = step * prices[i];
        bumped[i] = prices[i] + h;
        const double hi = eval_discount(f, at_prices(ctx, bumped, delta_storage));
        bumped[i] = prices[i] - h;
        const double lo = eval_discount(f, at_prices(ctx, bumped, delta_storage));
        bumped[i] = prices[i];
        out[i] = (hi - lo) / (2.0 * h);
    }
    return out;
}

/// min_i ( dF/dp_i - 8 f R_i / (p.R) ), with the minimizing index.
std::pair<double, std::size_t> domination_margin(std::span<const double> grad,
                                                 std::span<const double> prices,
                                                 std::span<const double> reserves,
                                                 double fee_rate) {
    const double s = dot(prices, reserves);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        const double m = grad[i] - 8.0 * fee_rate * reserves[i] / s;
        if (m < best) {
            best = m;
            arg = i;
        }
    }
    return {best, arg};
}

void demand_bounded(double value, const Vec& prices) {
    if (value > 1.0 + 1e-12) {
        throw PremiseFailure("discount exceeds 1 at prices starting " + fmt(prices.at(0)) +
                             ": F = " + fmt(value));
    }
}

}  // namespace

double gradient_line_integral(const DiscountFunction& f, const SegmentContext& ctx,
                              const SegmentSpec& spec) {
    if (spec.p1.size() != spec.p2.size() || spec.p1.empty()) {
        throw Error("line integral: endpoints must share a nonzero dimension");
    }
    const Vec delta_storage = ctx.delta.empty() ? Vec(spec.p1.size(), 0.0) : Vec{};
    const std::vector<double> kinks = interior_kinks(f, ctx, spec, delta_storage);
    if (!kinks.empty() && !spec.refine_kinks) {
        throw QuadratureAcrossKink("gradient kink at t = " + fmt(kinks.front()) +
                                   " on the segment; enable kink refinement");
    }

    const auto integrand = [&](double t) {
        const Vec p = segment_point(spec.p1, spec.p2, t);
        const Vec g = grad_discount_prices(f, at_prices(ctx, p, delta_storage));
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) acc += g[i] * (spec.p2[i] - spec.p1[i]);
        return acc;
    };

    // Cut strictly one-sided around each kink: the branch picked exactly at
    // the kink parameter is arbitrary, and an endpoint node on the wrong
    // branch costs ~ |jump| h / 3, far above the identity tolerance. The
    // leftover slivers are 2e-12 wide and contribute nothing at this
    // precision.
    std::vector<double> cuts{0.0};
    for (double t : kinks) {
        cuts.push_back(std::max(0.0, t - 1e-12));
        cuts.push_back(std::min(1.0, t + 1e-12));
    }
    cuts.push_back(1.0);

    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (!(cuts[k + 1] > cuts[k])) continue;  // collapsed sliver
        total += simpson(integrand, cuts[k], cuts[k + 1], spec.quadrature_points);
    }
    return total;
}

BoundIntegral bound_line_integral(const SegmentContext& ctx, const SegmentSpec& spec) {
    const double s1 = dot(spec.p1, ctx.reserves);
    const double s2 = dot(spec.p2, ctx.reserves);
    if (s1 <= 0.0 || s2 <= 0.0) {
        throw AllReservesZero("bound integral needs p.R > 0 at both endpoints");
    }
    BoundIntegral out;
    out.closed_form = 8.0 * ctx.fee_rate * std::log(s2 / s1);

    Vec direction(spec.p1.size());
    for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = spec.p2[i] - spec.p1[i];
    const double rd = dot(ctx.reserves, direction);
    const auto integrand = [&](double t) {
        const Vec p = segment_point(spec.p1, spec.p2, t);
        return 8.0 * ctx.fee_rate * rd / dot(p, ctx.reserves);
    };
    out.quadrature = simpson(integrand, 0.0, 1.0, spec.quadrature_points);
    return out;
}

DominationSearchResult find_gradient_domination_witness(const DiscountFunction& f,
                                                        const SegmentContext& ctx, const Vec& p1,
                                                        const WitnessSearchConfig& cfg) {
    if (ctx.fee_rate <= 0.0) {
        throw PremiseFailure("gradient domination needs a positive fee rate");
    }
    if (p1.empty()) throw Error("witness search: empty starting prices");

    DominationSearchResult result;
    const Vec delta_storage = ctx.delta.empty() ? Vec(p1.size(), 0.0) : Vec{};

    result.premise_value = eval_discount(f, at_prices(ctx, p1, delta_storage));
    demand_bounded(result.premise_value, p1);
    const double budget = (1.0 - result.premise_value) + cfg.slack;

    // Phase 1: race the logarithm against the bounded total variation. Each
    // doubling of prices adds exactly 8 f ln 2 to the bound integral while
    // F(p2) - F(p1) stays below the budget, so termination is guaranteed for
    // any positive fee rate.
    double scale = 1.0;
    bool outran = false;
    for (int k = 1; k <= cfg.max_doublings; ++k) {
        scale *= 2.0;
        const double growth = 8.0 * ctx.fee_rate * static_cast<double>(k) * std::numbers::ln2;
        result.trace.push_back({k, scale, growth, budget});
        Vec p2(p1.size());
        for (std::size_t i = 0; i < p2.size(); ++i) p2[i] = scale * p1[i];
        demand_bounded(eval_discount(f, at_prices(ctx, p2, delta_storage)), p2);
        if (growth > budget) {
            outran = true;
            break;
        }
    }
    if (!outran) {
        throw SearchBudgetExceeded("doubling cap hit before the bound outran the budget");
    }

    Vec p2(p1.size());
    for (std::size_t i = 0; i < p2.size(); ++i) p2[i] = scale * p1[i];

    // Phase 2: scan the segment for the most negative component margin and
    // confirm analytically computed gradients against finite differences.
    for (int grid = cfg.initial_grid; grid <= cfg.max_grid; grid = 2 * grid - 1) {
        struct Candidate {
            double margin;
            std::size_t component;
            double t;
        };
        std::vector<Candidate> candidates;
        for (int j = 0; j < grid; ++j) {
            const double t = static_cast<double>(j) / (grid - 1);
            const Vec p = segment_point(p1, p2, t);
            const Vec g = grad_discount_prices(f, at_prices(ctx, p, delta_storage));
            const auto [m, i] = domination_margin(g, p, ctx.reserves, ctx.fee_rate);
            if (m < -cfg.margin_threshold) candidates.push_back({m, i, t});
        }
        std::sort(candidates.begin(), candidates.end(),
                  [](const Candidate& a, const Candidate& b) { return a.margin < b.margin; });
        for (const Candidate& cand : candidates) {
            const Vec p = segment_point(p1, p2, cand.t);
            const Vec fd = fd_price_gradient(f, ctx, p, delta_storage, cfg.fd_step);
            const auto [fd_margin, fd_arg] = domination_margin(fd, p, ctx.reserves, ctx.fee_rate);
            const double residual =
                std::abs(cand.margin - fd_margin) / (1.0 + std::abs(cand.margin));
            if (fd_margin < -cfg.margin_threshold && residual <= cfg.agreement_rtol) {
                result.witness.point = p;
                result.witness.component = cand.component;
                result.witness.margin = cand.margin;
                result.witness.kind = WitnessKind::GradientDominationViolation;
                result.witness.verified_margin = fd_margin;
                result.witness.verification_residual = residual;
                result.grid_points = grid;
                (void)fd_arg;
                return result;
            }
        }
    }
    throw SearchBudgetExceeded("grid refinement cap hit without a verified witness");
}

double euler_residual(const DiscountFunction& f, const EvalContext& ctx) {
    const Vec g = grad_discount_prices(f, ctx);
    return dot(ctx.prices, g);
}

EulerReport check_euler(const DiscountFunction& f, const SamplerConfig& cfg) {
    EulerReport report;
    report.seed = cfg.seed;

    Rng rng(Rng::derive(cfg.seed, kEulerSalt));
    StateSamplerOptions opts;
    opts.dimension = cfg.dimension;

    for (int k = 0; k < cfg.samples; ++k) {
        const PoolState state = sample_state(rng, opts);
        const WeightVector wstar = sample_simplex(rng, opts);
        const Vec delta = sample_feasible_delta(rng, state.reserves);
        const EvalContext ctx{state.prices, wstar.values(), state.reserves, delta,
                              state.fee_rate};
        const Vec g = grad_discount_prices(f, ctx);
        const double scale = 1.0 + norm2(g) * norm2(state.prices);
        const double res = std::abs(dot(state.prices, g)) / scale;
        report.max_scaled_residual = std::max(report.max_scaled_residual, res);
    }
    report.samples_used = cfg.samples;
    report.pass = report.max_scaled_residual <= report.tolerance;
    return report;
}

NumeraireReport check_numeraire(const DiscountFunction& f, const PoolState& state,
                                const WeightVector& wstar, std::span<const double> delta,
                                const std::vector<double>& lambdas) {
    NumeraireReport report;
    const Vec zero(state.size(), 0.0);
    const std::span<const double> d = delta.empty() ? std::span<const double>(zero) : delta;
    const double base = pool_value(state, f, wstar, d).pool_value;

    for (double lambda : lambdas) {
        if (!(lambda > 0.0)) {
            throw ConfigError("lambdas", "price scales must be > 0, got " + fmt(lambda));
        }
        PoolState scaled = state;
        for (double& p : scaled.prices) p *= lambda;
        const double value = pool_value(scaled, f, wstar, d).pool_value;
        const double rel = std::abs(value - lambda * base) / (lambda * std::abs(base));
        report.rows.push_back({lambda, base, value, rel});
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    report.pass = report.max_rel_error <= report.tolerance;
    return report;
}

double inner_product_residual(const DiscountFunction& f, const PoolState& state,
                              const WeightVector& wstar, std::span<const double> delta) {
    const Vec zero(state.size(), 0.0);
    const std::span<const double> d = delta.empty() ? std::span<const double>(zero) : delta;
    const Vec grad = pool_value_gradient(state, f, wstar, d);
    const ValueBreakdown vb = pool_value(state, f, wstar, d);
    const double lhs = dot(state.prices, grad);
    return std::abs(lhs - vb.pool_value) / (1.0 + std::abs(vb.pool_value));
}

// The pool value (and hence both identity checks below) is only defined
// where the dilution factor stays positive; sampled evaluation points keep a
// margin so finite-difference bumps cannot leave the domain either.
constexpr double kDilutionMargin = 0.05;

bool in_value_domain(const DiscountFunction& f, const PoolState& state, const WeightVector& wstar,
                     const Vec& delta) {
    const EvalContext ctx{state.prices, wstar.values(), state.reserves, delta, state.fee_rate};
    return 1.0 + eval_discount(f, ctx) > kDilutionMargin;
}

InnerProductReport check_inner_product(const DiscountFunction& f, const SamplerConfig& cfg) {
    InnerProductReport report;
    report.seed = cfg.seed;

    Rng rng(Rng::derive(cfg.seed, kInnerSalt));
    StateSamplerOptions opts;
    opts.dimension = cfg.dimension;

    const long budget = 100L * cfg.samples;
    for (long draw = 0; draw < budget && report.samples_used < cfg.samples; ++draw) {
        const PoolState state = sample_state(rng, opts);
        const WeightVector wstar = sample_simplex(rng, opts);
        const Vec delta = sample_feasible_delta(rng, state.reserves);
        if (!in_value_domain(f, state, wstar, delta)) continue;
        const double res = inner_product_residual(f, state, wstar, delta);
        report.max_scaled_residual = std::max(report.max_scaled_residual, res);
        ++report.samples_used;
    }
    report.pass = report.max_scaled_residual <= report.tolerance && report.samples_used > 0;
    return report;
}

GradientConsistencyReport check_gradient_consistency(const DiscountFunction& f,
                                                     const SamplerConfig& cfg) {
    GradientConsistencyReport report;
    report.seed = cfg.seed;

    Rng rng(Rng::derive(cfg.seed, kConsistencySalt));
    StateSamplerOptions opts;
    opts.dimension = cfg.dimension;

    constexpr double kFdStep = 1e-6;
    constexpr double kKinkSlack = 1e-3;  // one-sided slope disagreement bound

    const long budget = 100L * cfg.samples;
    int accepted = 0;
    for (long draw = 0; draw < budget && accepted < cfg.samples; ++draw) {
        const PoolState state = sample_state(rng, opts);
        const WeightVector wstar = sample_simplex(rng, opts);
        const Vec delta = sample_feasible_delta(rng, state.reserves);
        if (!in_value_domain(f, state, wstar, delta)) continue;
        ++accepted;

        const Vec analytic = pool_value_gradient(state, f, wstar, delta);
        const double center = pool_value(state, f, wstar, delta).pool_value;

        // One-sided slopes per component: a kink between p_i - h and p_i + h
        // shows up as a jump far beyond the O(h) curvature term.
        PoolState bumped = state;
        bool straddles = false;
        double worst = 0.0;
        for (std::size_t i = 0; i < state.size() && !straddles; ++i) {
            const double h = kFdStep * state.prices[i];
            bumped.prices[i] = state.prices[i] + h;
            const double hi = pool_value(bumped, f, wstar, delta).pool_value;
            bumped.prices[i] = state.prices[i] - h;
            const double lo = pool_value(bumped, f, wstar, delta).pool_value;
            bumped.prices[i] = state.prices[i];

            const double fwd = (hi - center) / h;
            const double bwd = (center - lo) / h;
            if (std::abs(fwd - bwd) > kKinkSlack * (1.0 + std::abs(analytic[i]))) {
                straddles = true;
                break;
            }
            const double central = (hi - lo) / (2.0 * h);
            const double rel =
                std::abs(central - analytic[i]) / (1.0 + std::abs(analytic[i]));
            worst = std::max(worst, rel);
        }
        if (straddles) {
            ++report.skipped_kinks;
            continue;
        }
        report.max_rel_error = std::max(report.max_rel_error, worst);
        ++report.samples_used;
    }
    report.pass = report.max_rel_error <= report.tolerance && report.samples_used > 0;
    return report;
}

GradientTheoremReport check_gradient_theorem(const DiscountFunction& f, const SamplerConfig& cfg,
                                             int quadrature_points) {
    GradientTheoremReport report;
    report.seed = cfg.seed;

    Rng rng(Rng::derive(cfg.seed, kTheoremSalt));
    StateSamplerOptions opts;
    opts.dimension = cfg.dimension;

    for (int k = 0; k < cfg.samples; ++k) {
        const PoolState state = sample_state(rng, opts);
        const WeightVector wstar = sample_simplex(rng, opts);

        SegmentContext ctx;
        ctx.target_weights.assign(wstar.values().begin(), wstar.values().end());
        ctx.reserves = state.reserves;
        ctx.fee_rate = state.fee_rate;

        SegmentSpec seg;
        seg.p1 = state.prices;
        seg.p2 = sample_prices(rng, opts);
        seg.quadrature_points = quadrature_points;

        const Vec zero(state.size(), 0.0);
        const double f1 = eval_discount(f, at_prices(ctx, seg.p1, zero));
        const double f2 = eval_discount(f, at_prices(ctx, seg.p2, zero));
        const double integral = gradient_line_integral(f, ctx, seg);
        const double err = std::abs(integral - (f2 - f1)) / (1.0 + std::abs(f2 - f1));
        report.max_scaled_error = std::max(report.max_scaled_error, err);

        const BoundIntegral bound = bound_line_integral(ctx, seg);
        report.max_bound_disagreement = std::max(
            report.max_bound_disagreement, std::abs(bound.quadrature - bound.closed_form));
    }
    report.segments_used = cfg.samples;
    report.pass = report.max_scaled_error <= report.tolerance &&
                  report.max_bound_disagreement <= report.bound_tolerance;
    return report;
}

ShrinkageReport falsify_uniform_shrinkage(const DiscountFunction& f, const WeightVector& wstar,
                                          const std::vector<double>& c_grid,
                                          const SamplerConfig& cfg) {
    for (double c : c_grid) {
        if (!(c > 0.0 && c < 1.0)) {
            throw ConfigError("shrink_c", "entries must lie strictly inside (0, 1), got " +
                                              fmt(c));
        }
    }

    ShrinkageReport report;
    report.seed = cfg.seed;
    Rng rng(Rng::derive(cfg.seed, kShrinkSalt));
    StateSamplerOptions opts;
    opts.dimension = wstar.size();

    constexpr int kMaxTries = 200;
    constexpr double kZeroTol = 1e-12;
    constexpr double kEulerTol = 1e-8;
    constexpr double kMarginFloor = 1e-10;

    bool all_broken = !c_grid.empty();
    for (double c : c_grid) {
        // A fresh state with no active discount, drawn independently per c.
        PoolState state;
        bool found = false;
        int tries = 0;
        for (; tries < kMaxTries; ++tries) {
            state = sample_state(rng, opts);
            const Vec zero(state.size(), 0.0);
            const EvalContext ctx{state.prices, wstar.values(), state.reserves, zero,
                                  state.fee_rate};
            if (std::abs(eval_discount(f, ctx)) <= kZeroTol) {
                found = true;
                break;
            }
        }
        report.zero_state_tries = std::max(report.zero_state_tries, tries + 1);
        if (!found) {
            throw NoZeroState("no state with F = 0 found in " + std::to_string(kMaxTries) +
                              " draws; the discount never switches off");
        }

        const Vec zero(state.size(), 0.0);
        const EvalContext ctx{state.prices, wstar.values(), state.reserves, zero,
                              state.fee_rate};
        const double s = dot(state.prices, state.reserves);
        const double euler = std::abs(euler_residual(f, ctx)) / (1.0 + s);
        if (euler > kEulerTol) {
            throw PremiseFailure("numeraire invariance violated: scaled Euler residual " +
                                 fmt(euler) + " at the zero state");
        }

        const Vec grad = pool_value_gradient(state, f, wstar, zero);
        ShrinkageRow row;
        row.c = c;
        row.prices = state.prices;
        row.euler_residual = euler;
        row.aggregate_new = dot(state.prices, grad);
        row.aggregate_bound = c * s;

        // Some component must beat c: the p-weighted margins sum to
        // p.grad V - c p.R = (1 - c) p.R + f p.l > 0.
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t i = 0; i < state.size(); ++i) {
            const double m = state.prices[i] * (grad[i] - c * state.reserves[i]);
            if (m > best) {
                best = m;
                arg = i;
            }
        }
        row.component = arg;
        row.component_margin = best;
        report.rows.push_back(row);

        const Vec fd = pool_value_gradient_fd(state, f, wstar, zero);
        const double fd_margin = state.prices[arg] * (fd[arg] - c * state.reserves[arg]);

        Witness w;
        w.point = state.prices;
        w.component = arg;
        w.margin = best;
        w.kind = WitnessKind::UniformShrinkageViolation;
        w.verified_margin = fd_margin;
        w.verification_residual = std::abs(best - fd_margin) / (1.0 + std::abs(best));
        report.witnesses.push_back(w);

        if (!(best > kMarginFloor && fd_margin > kMarginFloor)) all_broken = false;
    }
    report.falsified = all_broken;
    return report;
}

}  // namespace twm
