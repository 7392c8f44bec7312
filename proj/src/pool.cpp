#include "twm/pool.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace twm {

void validate(const PoolState& state) {
    const std::size_t n = state.prices.size();
    if (n == 0) throw Error("pool: needs at least one asset");
    if (state.reserves.size() != n || state.lent.size() != n)
        throw Error("pool: prices, reserves and lent must share one length");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(state.prices[i] > 0.0))
            throw Error("pool: prices[" + std::to_string(i + 1) + "] must be > 0");
        if (!(state.reserves[i] >= 0.0))
            throw Error("pool: reserves[" + std::to_string(i + 1) + "] must be >= 0");
        if (!(state.lent[i] >= 0.0))
            throw Error("pool: lent[" + std::to_string(i + 1) + "] must be >= 0");
    }
    if (!(state.fee_rate > 0.0 && state.fee_rate < 1.0))
        throw Error("pool: fee_rate must lie in (0,1)");
}

WeightVector::WeightVector(Vec weights) : weights_(std::move(weights)) {
    if (weights_.empty()) throw Error("weights: empty vector");
    double sum = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
        if (!(weights_[i] >= 0.0 && weights_[i] <= 1.0))
            throw Error("weights[" + std::to_string(i + 1) + "] must lie in [0,1]");
        sum += weights_[i];
    }
    if (std::abs(sum - 1.0) > 1e-12)
        throw Error("weights must sum to 1 (got " + std::to_string(sum) + ")");
}

WeightVector mark_weights(std::span<const double> prices, std::span<const double> reserves) {
    const double total = dot(prices, reserves);
    if (!(total > 0.0)) throw AllReservesZero("mark_weights: p.R = 0, weights undefined");
    Vec w(prices.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = prices[i] * reserves[i] / total;
    return WeightVector(std::move(w));
}

WeightVector mark_weights(const PoolState& state) {
    validate(state);
    return mark_weights(state.prices, state.reserves);
}

double holdings_value(const PoolState& state) {
    validate(state);
    return dot(state.prices, state.reserves);
}

EvalContext make_context(const PoolState& state, const WeightVector& wstar,
                         std::span<const double> delta) {
    return {state.prices, wstar.values(), state.reserves, delta, state.fee_rate};
}

ValueBreakdown pool_value(const PoolState& state, const DiscountFunction& f,
                          const WeightVector& wstar, std::span<const double> delta) {
    validate(state);
    if (wstar.size() != state.size()) throw Error("pool_value: target weight width mismatch");
    ValueBreakdown out;
    out.holdings_value = dot(state.prices, state.reserves);
    out.discount = eval_discount(f, make_context(state, wstar, delta));
    if (!(1.0 + out.discount > 0.0))
        throw DegenerateDiscount("pool_value: 1+F = " + std::to_string(1.0 + out.discount) +
                                 " <= 0; the dilution factor is undefined");
    out.diluted_value = out.holdings_value / (1.0 + out.discount);
    out.fee_income = state.fee_rate * dot(state.prices, state.lent);
    out.pool_value = out.diluted_value + out.fee_income;
    return out;
}

Vec pool_value_gradient(const PoolState& state, const DiscountFunction& f,
                        const WeightVector& wstar, std::span<const double> delta) {
    validate(state);
    const EvalContext ctx = make_context(state, wstar, delta);
    const double discount = eval_discount(f, ctx);
    if (!(1.0 + discount > 0.0))
        throw DegenerateDiscount("pool_value_gradient: 1+F <= 0 at the evaluation point");
    const double total = dot(state.prices, state.reserves);
    const double one_plus = 1.0 + discount;
    const Vec grad_f = grad_discount_prices(f, ctx);
    Vec g(state.size());
    for (std::size_t i = 0; i < g.size(); ++i)
        g[i] = state.reserves[i] / one_plus - total / (one_plus * one_plus) * grad_f[i] +
               state.fee_rate * state.lent[i];
    return g;
}

Vec pool_value_gradient_fd(const PoolState& state, const DiscountFunction& f,
                           const WeightVector& wstar, std::span<const double> delta,
                           double step) {
    validate(state);
    if (!(step > 0.0)) throw Error("pool_value_gradient_fd: step must be > 0");
    if (step >= 1.0)
        throw StepTooLarge("pool_value_gradient_fd: relative step " + std::to_string(step) +
                           " pushes prices out of the positive orthant");
    Vec g(state.size());
    PoolState probe = state;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double h = step * state.prices[i];
        probe.prices[i] = state.prices[i] + h;
        const double up = pool_value(probe, f, wstar, delta).pool_value;
        probe.prices[i] = state.prices[i] - h;
        const double down = pool_value(probe, f, wstar, delta).pool_value;
        // divide by the realized spacing, not 2h, to absorb rounding in p +- h
        g[i] = (up - down) / ((state.prices[i] + h) - (state.prices[i] - h));
        probe.prices[i] = state.prices[i];
    }
    return g;
}

}  // namespace twm
