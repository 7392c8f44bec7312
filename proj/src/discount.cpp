#include "twm/discount.hpp"

#include <cmath>

namespace twm {

namespace {

void check_context(const EvalContext& ctx) {
    const std::size_t n = ctx.prices.size();
    if (n == 0) throw Error("discount evaluation: empty price vector");
    if (ctx.target_weights.size() != n || ctx.reserves.size() != n || ctx.delta.size() != n)
        throw Error("discount evaluation: vector widths disagree");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(ctx.prices[i] > 0.0))
            throw Error("discount evaluation: prices must be strictly positive");
        if (ctx.reserves[i] + ctx.delta[i] < 0.0)
            throw InfeasibleDelta("reserve " + std::to_string(i + 1) +
                                  " would go negative: R+delta = " +
                                  std::to_string(ctx.reserves[i] + ctx.delta[i]));
    }
}

}  // namespace

double eval_discount(const DiscountFunction& f, const EvalContext& ctx) {
    check_context(ctx);
    return f.value(ctx);
}

Vec grad_discount_prices(const DiscountFunction& f, const EvalContext& ctx) {
    check_context(ctx);
    return f.price_gradient(ctx);
}

Vec grad_discount_delta(const DiscountFunction& f, const EvalContext& ctx) {
    check_context(ctx);
    return f.delta_gradient(ctx);
}

// ---------------------------------------------------------------------------
// CanonicalQuadratic
// ---------------------------------------------------------------------------

CanonicalQuadratic::CanonicalQuadratic(SymMatrix stiffness) : stiffness_(std::move(stiffness)) {
    if (!stiffness_.positive_definite())
        throw Error("canonical-quadratic stiffness must be positive definite");
}

Vec CanonicalQuadratic::preserving_rebalance(const EvalContext& ctx) {
    const double total = dot(ctx.prices, ctx.reserves);
    Vec d(ctx.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = total * ctx.target_weights[i] / ctx.prices[i] - ctx.reserves[i];
    return d;
}

double CanonicalQuadratic::value(const EvalContext& ctx) const {
    const Vec dstar = preserving_rebalance(ctx);
    const Vec off = sub(ctx.delta, dstar);
    return 0.5 * stiffness_.quad(dstar) - 0.5 * stiffness_.quad(off);
}

Vec CanonicalQuadratic::delta_gradient(const EvalContext& ctx) const {
    const Vec dstar = preserving_rebalance(ctx);
    Vec g = stiffness_.mul(sub(ctx.delta, dstar));
    for (double& x : g) x = -x;
    return g;
}

Vec CanonicalQuadratic::price_gradient(const EvalContext& ctx) const {
    // dF = delta' B d(dstar) with d(dstar)_i/dp_j = w*_i (R_j/p_i - S 1{i=j}/p_i^2)
    const std::size_t n = ctx.size();
    const double total = dot(ctx.prices, ctx.reserves);
    const Vec g = stiffness_.mul(ctx.delta);
    double mix = 0.0;
    for (std::size_t i = 0; i < n; ++i) mix += g[i] * ctx.target_weights[i] / ctx.prices[i];
    Vec out(n);
    for (std::size_t j = 0; j < n; ++j)
        out[j] = ctx.reserves[j] * mix -
                 g[j] * ctx.target_weights[j] * total / (ctx.prices[j] * ctx.prices[j]);
    return out;
}

// ---------------------------------------------------------------------------
// ClippedLogRay
// ---------------------------------------------------------------------------

ClippedLogRay::ClippedLogRay(double anchor_value, double cap)
    : anchor_value_(anchor_value), cap_(cap) {
    if (!(anchor_value_ > 0.0)) throw Error("clipped-log-ray anchor_value must be positive");
}

double ClippedLogRay::clip_threshold(double fee_rate) const {
    return anchor_value_ * std::exp(cap_ / (8.0 * fee_rate));
}

double ClippedLogRay::value(const EvalContext& ctx) const {
    const double total = dot(ctx.prices, ctx.reserves);
    if (!(total > 0.0)) throw Error("clipped-log-ray needs p.R > 0");
    return std::min(cap_, 8.0 * ctx.fee_rate * std::log(total / anchor_value_));
}

Vec ClippedLogRay::price_gradient(const EvalContext& ctx) const {
    const double total = dot(ctx.prices, ctx.reserves);
    if (!(total > 0.0)) throw Error("clipped-log-ray needs p.R > 0");
    const double raw = 8.0 * ctx.fee_rate * std::log(total / anchor_value_);
    Vec g(ctx.size(), 0.0);
    if (raw < cap_) {
        const double s = 8.0 * ctx.fee_rate / total;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = s * ctx.reserves[i];
    }
    // at or above the clip the capped branch is flat
    return g;
}

std::vector<double> ClippedLogRay::segment_kinks(std::span<const double> p1,
                                                 std::span<const double> p2,
                                                 const EvalContext& ctx) const {
    const double s1 = dot(p1, ctx.reserves);
    const double s2 = dot(p2, ctx.reserves);
    const double threshold = clip_threshold(ctx.fee_rate);
    if (s1 == s2) return {};
    const double t = (threshold - s1) / (s2 - s1);
    if (t > 1e-12 && t < 1.0 - 1e-12) return {t};
    return {};
}

// ---------------------------------------------------------------------------
// DslDiscount
// ---------------------------------------------------------------------------

DslDiscount::DslDiscount(std::string source)
    : source_(std::move(source)), tree_(fexpr::parse(source_)) {}

double DslDiscount::value(const EvalContext& ctx) const {
    return fexpr::eval(*tree_, ctx.as_env());
}

Vec DslDiscount::price_gradient(const EvalContext& ctx) const {
    return fexpr::grad(*tree_, ctx.as_env(), fexpr::GradTarget::Prices).gradient;
}

Vec DslDiscount::delta_gradient(const EvalContext& ctx) const {
    return fexpr::grad(*tree_, ctx.as_env(), fexpr::GradTarget::Delta).gradient;
}

}  // namespace twm
