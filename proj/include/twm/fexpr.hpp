#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "twm/errors.hpp"
#include "twm/linalg.hpp"

namespace twm::fexpr {

/// 1-based position in the expression source text.
struct SourcePos {
    int line = 1;
    int column = 1;
};

class SyntaxError : public Error {
public:
    SyntaxError(SourcePos pos, const std::string& token, const std::string& what);
    SourcePos pos() const { return pos_; }
    const std::string& token() const { return token_; }

private:
    SourcePos pos_;
    std::string token_;
};

class ArityError : public Error {
public:
    ArityError(SourcePos pos, const std::string& fn, int expected, int got);
    SourcePos pos() const { return pos_; }

private:
    SourcePos pos_;
};

class UnknownIdentifier : public Error {
public:
    UnknownIdentifier(SourcePos pos, const std::string& name);
    SourcePos pos() const { return pos_; }

private:
    SourcePos pos_;
};

/// Evaluation left the domain of a sub-expression (ln/sqrt argument,
/// division by zero, out-of-range index). Carries the sub-expression site.
class DomainError : public Error {
public:
    DomainError(SourcePos pos, const std::string& what);
    SourcePos pos() const { return pos_; }

private:
    SourcePos pos_;
};

/// Differentiation hit an exact min/max tie or abs(0); the selected branch
/// would be an arbitrary subgradient pick, so it is reported instead.
class NondifferentiablePoint : public Error {
public:
    NondifferentiablePoint(SourcePos pos, const std::string& what);
    SourcePos pos() const { return pos_; }

private:
    SourcePos pos_;
};

enum class VectorId { Prices, TargetWeights, Reserves, Delta };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };
enum class UnaryFn { Neg, Ln, Exp, Sqrt, Abs };
enum class MinMaxFn { Min, Max };
enum class AggregateFn { Sum, Norm2 };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Literal {
    double value;
};
struct FeeVar {};
/// Bare vector name; only valid inside aggregate arguments (element context).
struct VectorRef {
    VectorId id;
};
/// Indexed access, 1-based in the surface syntax.
struct Element {
    VectorId id;
    int index;
};
struct Unary {
    UnaryFn fn;
    ExprPtr arg;
};
struct Binary {
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};
struct MinMax {
    MinMaxFn fn;
    ExprPtr a;
    ExprPtr b;
};
/// sum(a) or norm2(a); the argument is evaluated once per component.
struct Aggregate {
    AggregateFn fn;
    ExprPtr arg;
};
struct Dot {
    ExprPtr a;
    ExprPtr b;
};

struct Expr {
    std::variant<Literal, FeeVar, VectorRef, Element, Unary, Binary, MinMax, Aggregate, Dot> node;
    SourcePos pos;
};

/// Parses source text into an AST. Diagnostics carry 1-based line/column
/// and the offending token.
ExprPtr parse(std::string_view source);

/// Canonical text form; parse(pretty_print(e)) is structurally equal to e.
std::string pretty_print(const Expr& e);

bool structurally_equal(const Expr& a, const Expr& b);

/// Variable bindings for evaluation. n is prices.size(); the other vectors
/// must match n or be empty (empty reads as all zeros).
struct Env {
    std::span<const double> prices;
    std::span<const double> target_weights;
    std::span<const double> reserves;
    std::span<const double> delta;
    double fee_rate = 0.0;

    std::size_t size() const { return prices.size(); }
};

double eval(const Expr& e, const Env& env);

enum class GradTarget { Prices, Delta };

struct GradResult {
    double value;
    Vec gradient;
};

/// Forward-mode gradient with respect to every component of the target
/// vector, computed in one dual-number sweep.
GradResult grad(const Expr& e, const Env& env, GradTarget target);

/// Forward-mode carrier: value plus the tangent with respect to each
/// component of the differentiation target.
class DualVector {
public:
    DualVector() = default;
    DualVector(double value, Vec partials) : value_(value), partials_(std::move(partials)) {}

    static DualVector constant(double v, std::size_t n) { return {v, Vec(n, 0.0)}; }

    static DualVector seeded(double v, std::size_t n, std::size_t slot) {
        Vec t(n, 0.0);
        t[slot] = 1.0;
        return {v, std::move(t)};
    }

    double value() const { return value_; }
    const Vec& partials() const { return partials_; }

    bool constant_tangent() const {
        for (double d : partials_)
            if (d != 0.0) return false;
        return true;
    }

    /// Unary chain rule: g(x) with g(value) = new_value, g'(value) = slope.
    DualVector chain(double new_value, double slope) const {
        Vec t(partials_.size());
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = slope * partials_[i];
        return {new_value, std::move(t)};
    }

    /// Binary chain rule: value with d/da = da, d/db = db.
    static DualVector combine(double value, double da, const DualVector& a, double db,
                              const DualVector& b) {
        Vec t(a.partials_.size());
        for (std::size_t i = 0; i < t.size(); ++i)
            t[i] = da * a.partials_[i] + db * b.partials_[i];
        return {value, std::move(t)};
    }

    friend DualVector operator+(const DualVector& a, const DualVector& b) {
        return combine(a.value_ + b.value_, 1.0, a, 1.0, b);
    }
    friend DualVector operator-(const DualVector& a, const DualVector& b) {
        return combine(a.value_ - b.value_, 1.0, a, -1.0, b);
    }
    friend DualVector operator*(const DualVector& a, const DualVector& b) {
        return combine(a.value_ * b.value_, b.value_, a, a.value_, b);
    }
    DualVector operator-() const { return chain(-value_, -1.0); }

private:
    double value_ = 0.0;
    Vec partials_;
};

}  // namespace twm::fexpr
