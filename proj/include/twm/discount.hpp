#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "twm/errors.hpp"
#include "twm/fexpr.hpp"
#include "twm/linalg.hpp"

namespace twm {

/// One evaluation point for a discount function. The fee rate rides along
/// because two of the families (and any DSL expression using `f`) read it.
struct EvalContext {
    std::span<const double> prices;
    std::span<const double> target_weights;
    std::span<const double> reserves;
    std::span<const double> delta;
    double fee_rate = 0.0;

    std::size_t size() const { return prices.size(); }

    fexpr::Env as_env() const {
        return {prices, target_weights, reserves, delta, fee_rate};
    }
};

/// How strictly "no discount at delta = 0" is read when certifying C1:
/// Strong demands F(p, w*, R, 0) = 0 at every state, Weak only at states
/// already sitting on the target weights.
enum class C1Reading { Strong, Weak };

/// Scalar multiplier family: the pool value is scaled by 1/(1+F).
class DiscountFunction {
public:
    virtual ~DiscountFunction() = default;

    virtual double value(const EvalContext& ctx) const = 0;
    virtual Vec price_gradient(const EvalContext& ctx) const = 0;
    virtual Vec delta_gradient(const EvalContext& ctx) const = 0;
    virtual std::string name() const = 0;

    /// Parameters t in (0,1) where the price gradient is discontinuous along
    /// the segment p1 + t (p2 - p1). Families without closed-form kink
    /// knowledge return nothing.
    virtual std::vector<double> segment_kinks(std::span<const double> p1,
                                              std::span<const double> p2,
                                              const EvalContext& ctx) const {
        (void)p1;
        (void)p2;
        (void)ctx;
        return {};
    }

    C1Reading c1_reading() const { return c1_reading_; }
    void set_c1_reading(C1Reading r) { c1_reading_ = r; }

private:
    C1Reading c1_reading_ = C1Reading::Strong;
};

/// F == 0 everywhere: the mechanism-free baseline.
class ConstantZero final : public DiscountFunction {
public:
    double value(const EvalContext&) const override { return 0.0; }
    Vec price_gradient(const EvalContext& ctx) const override { return Vec(ctx.size(), 0.0); }
    Vec delta_gradient(const EvalContext& ctx) const override { return Vec(ctx.size(), 0.0); }
    std::string name() const override { return "constant-zero"; }
};

/// Concave quadratic reward peaked at the value-preserving rebalance to the
/// target weights:
///   F(delta) = q(d*)/2 - q(delta - d*)/2,  q(x) = x'Bx,
///   d*_i = (p.R) w*_i / p_i - R_i.
/// Zero at delta = 0 by construction, maximized exactly at d*, and
/// homogeneous of degree zero in prices.
class CanonicalQuadratic final : public DiscountFunction {
public:
    explicit CanonicalQuadratic(SymMatrix stiffness);

    double value(const EvalContext& ctx) const override;
    Vec price_gradient(const EvalContext& ctx) const override;
    Vec delta_gradient(const EvalContext& ctx) const override;
    std::string name() const override { return "canonical-quadratic"; }

    const SymMatrix& stiffness() const { return stiffness_; }
    void scale_stiffness(double s) { stiffness_.scale(s); }

    /// The reserve change that moves the weights to target while keeping
    /// p.(R + d) equal to p.R.
    static Vec preserving_rebalance(const EvalContext& ctx);

private:
    SymMatrix stiffness_;
};

/// F = min(cap, 8 f ln(p.R / v0)): saturates the component-wise gradient
/// growth condition below the clip and goes flat above it.
class ClippedLogRay final : public DiscountFunction {
public:
    explicit ClippedLogRay(double anchor_value, double cap = 1.0);

    double value(const EvalContext& ctx) const override;
    Vec price_gradient(const EvalContext& ctx) const override;
    Vec delta_gradient(const EvalContext& ctx) const override { return Vec(ctx.size(), 0.0); }
    std::string name() const override { return "clipped-log-ray"; }
    std::vector<double> segment_kinks(std::span<const double> p1, std::span<const double> p2,
                                      const EvalContext& ctx) const override;

    double anchor_value() const { return anchor_value_; }
    double cap() const { return cap_; }

    /// Value of p.R at which the clip engages for a given fee rate.
    double clip_threshold(double fee_rate) const;

private:
    double anchor_value_;
    double cap_;
};

/// User-defined discount function; gradients come from the forward-mode
/// sweep over the expression.
class DslDiscount final : public DiscountFunction {
public:
    explicit DslDiscount(std::string source);

    double value(const EvalContext& ctx) const override;
    Vec price_gradient(const EvalContext& ctx) const override;
    Vec delta_gradient(const EvalContext& ctx) const override;
    std::string name() const override { return "dsl"; }

    const std::string& source() const { return source_; }
    const fexpr::Expr& tree() const { return *tree_; }

private:
    std::string source_;
    fexpr::ExprPtr tree_;
};

/// Entry points with the shared precondition checks (positive prices,
/// consistent widths, R + delta >= 0).
double eval_discount(const DiscountFunction& f, const EvalContext& ctx);
Vec grad_discount_prices(const DiscountFunction& f, const EvalContext& ctx);
Vec grad_discount_delta(const DiscountFunction& f, const EvalContext& ctx);

}  // namespace twm
