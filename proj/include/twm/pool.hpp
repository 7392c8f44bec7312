#pragma once

#include <span>
#include <vector>

#include "twm/discount.hpp"
#include "twm/errors.hpp"
#include "twm/linalg.hpp"

namespace twm {

/// Full pool configuration: oracle prices, on-chain reserves, the lent
/// amounts earning the fee, and the per-period lending fee rate.
struct PoolState {
    Vec prices;    // quote currency per asset unit, strictly positive
    Vec reserves;  // asset units, nonnegative
    Vec lent;      // asset units, nonnegative
    double fee_rate = 0.0;

    std::size_t size() const { return prices.size(); }
};

/// Throws on any violated invariant (widths, signs, fee range).
void validate(const PoolState& state);

/// Point on the simplex; validated at construction.
class WeightVector {
public:
    explicit WeightVector(Vec weights);

    std::span<const double> values() const { return weights_; }
    double operator[](std::size_t i) const { return weights_[i]; }
    std::size_t size() const { return weights_.size(); }

private:
    Vec weights_;
};

/// Mark-to-market weights w_i = p_i R_i / (p.R).
WeightVector mark_weights(std::span<const double> prices, std::span<const double> reserves);
WeightVector mark_weights(const PoolState& state);

/// Pool value without the mechanism: p.R (fee income excluded; its price
/// gradient is exactly the reserve vector).
double holdings_value(const PoolState& state);

/// Pool value under the mechanism, term by term.
struct ValueBreakdown {
    double holdings_value = 0.0;  // p.R
    double discount = 0.0;        // F at the evaluation point
    double diluted_value = 0.0;   // p.R / (1+F)
    double fee_income = 0.0;      // f p.l
    double pool_value = 0.0;      // diluted_value + fee_income
};

EvalContext make_context(const PoolState& state, const WeightVector& wstar,
                         std::span<const double> delta);

/// V = p.R / (1 + F) + f p.l. Throws DegenerateDiscount when 1 + F <= 0.
ValueBreakdown pool_value(const PoolState& state, const DiscountFunction& f,
                          const WeightVector& wstar, std::span<const double> delta);

/// Analytic price gradient: R/(1+F) - (p.R)/(1+F)^2 grad_p F + f l.
Vec pool_value_gradient(const PoolState& state, const DiscountFunction& f,
                        const WeightVector& wstar, std::span<const double> delta);

/// Central-difference oracle for the gradient above; the step is relative
/// (h_i = step * p_i) so rays spanning magnitudes stay well conditioned.
Vec pool_value_gradient_fd(const PoolState& state, const DiscountFunction& f,
                           const WeightVector& wstar, std::span<const double> delta,
                           double step = 1e-6);

}  // namespace twm
