#include "twm/fexpr.hpp"

#include <cassert>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>

namespace twm::fexpr {

namespace {

std::string pos_str(SourcePos p) {
    return std::to_string(p.line) + ":" + std::to_string(p.column);
}

}  // namespace

SyntaxError::SyntaxError(SourcePos pos, const std::string& token, const std::string& what)
    : Error("syntax error at " + pos_str(pos) + " near '" + token + "': " + what),
      pos_(pos),
      token_(token) {}

ArityError::ArityError(SourcePos pos, const std::string& fn, int expected, int got)
    : Error("arity error at " + pos_str(pos) + ": " + fn + " takes " + std::to_string(expected) +
            " argument(s), got " + std::to_string(got)),
      pos_(pos) {}

UnknownIdentifier::UnknownIdentifier(SourcePos pos, const std::string& name)
    : Error("unknown identifier at " + pos_str(pos) + ": '" + name + "'"), pos_(pos) {}

DomainError::DomainError(SourcePos pos, const std::string& what)
    : Error("domain error at " + pos_str(pos) + ": " + what), pos_(pos) {}

NondifferentiablePoint::NondifferentiablePoint(SourcePos pos, const std::string& what)
    : Error("nondifferentiable point at " + pos_str(pos) + ": " + what), pos_(pos) {}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

namespace {

enum class Tok {
    Number,
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    End
};

struct Token {
    Tok kind;
    std::string text;
    SourcePos pos;
    double number = 0.0;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& current() const { return cur_; }

    void advance() {
        skip_ws();
        cur_.pos = pos_;
        if (at_end()) {
            cur_ = {Tok::End, "<end of input>", pos_};
            return;
        }
        const char c = src_[i_];
        switch (c) {
            case '+': single(Tok::Plus, c); return;
            case '-': single(Tok::Minus, c); return;
            case '*': single(Tok::Star, c); return;
            case '/': single(Tok::Slash, c); return;
            case '^': single(Tok::Caret, c); return;
            case '(': single(Tok::LParen, c); return;
            case ')': single(Tok::RParen, c); return;
            case '[': single(Tok::LBracket, c); return;
            case ']': single(Tok::RBracket, c); return;
            case ',': single(Tok::Comma, c); return;
            default: break;
        }
        if (is_digit(c) || (c == '.' && i_ + 1 < src_.size() && is_digit(src_[i_ + 1]))) {
            lex_number();
            return;
        }
        if (is_ident_start(c)) {
            lex_ident();
            return;
        }
        throw SyntaxError(pos_, std::string(1, c), "unexpected character");
    }

private:
    static bool is_digit(char c) { return c >= '0' && c <= '9'; }
    static bool is_ident_start(char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
    }
    static bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

    bool at_end() const { return i_ >= src_.size(); }

    void bump() {
        if (src_[i_] == '\n') {
            ++pos_.line;
            pos_.column = 1;
        } else {
            ++pos_.column;
        }
        ++i_;
    }

    void skip_ws() {
        while (!at_end() && (src_[i_] == ' ' || src_[i_] == '\t' || src_[i_] == '\r' ||
                             src_[i_] == '\n'))
            bump();
        cur_.pos = pos_;
    }

    void single(Tok k, char c) {
        cur_ = {k, std::string(1, c), pos_};
        bump();
    }

    // Literals are plain decimals (digits, optional dot, digits); scientific
    // notation is deliberately not part of the surface syntax.
    void lex_number() {
        const SourcePos start = pos_;
        const std::size_t begin = i_;
        while (!at_end() && is_digit(src_[i_])) bump();
        if (!at_end() && src_[i_] == '.') {
            bump();
            while (!at_end() && is_digit(src_[i_])) bump();
        }
        const std::string text(src_.substr(begin, i_ - begin));
        double v = 0.0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (res.ec != std::errc() || res.ptr != text.data() + text.size())
            throw SyntaxError(start, text, "malformed numeric literal");
        cur_ = {Tok::Number, text, start, v};
    }

    void lex_ident() {
        const SourcePos start = pos_;
        const std::size_t begin = i_;
        while (!at_end() && is_ident_char(src_[i_])) bump();
        cur_ = {Tok::Ident, std::string(src_.substr(begin, i_ - begin)), start};
    }

    std::string_view src_;
    std::size_t i_ = 0;
    SourcePos pos_{1, 1};
    Token cur_{Tok::End, "", {1, 1}};
};

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

ExprPtr make(Expr e) { return std::make_unique<Expr>(std::move(e)); }

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) {}

    ExprPtr run() {
        ExprPtr e = parse_expr(/*element_ctx=*/false);
        expect_end();
        return e;
    }

private:
    const Token& cur() const { return lex_.current(); }

    void advance() { lex_.advance(); }

    void expect(Tok k, const char* what) {
        if (cur().kind != k) throw SyntaxError(cur().pos, cur().text, what);
        advance();
    }

    void expect_end() {
        if (cur().kind != Tok::End)
            throw SyntaxError(cur().pos, cur().text, "expected end of expression");
    }

    ExprPtr parse_expr(bool element_ctx) {
        ExprPtr lhs = parse_term(element_ctx);
        for (;;) {
            if (cur().kind == Tok::Plus || cur().kind == Tok::Minus) {
                const BinaryOp op = cur().kind == Tok::Plus ? BinaryOp::Add : BinaryOp::Sub;
                const SourcePos pos = cur().pos;
                advance();
                ExprPtr rhs = parse_term(element_ctx);
                lhs = make({Binary{op, std::move(lhs), std::move(rhs)}, pos});
            } else {
                return lhs;
            }
        }
    }

    ExprPtr parse_term(bool element_ctx) {
        ExprPtr lhs = parse_factor(element_ctx);
        for (;;) {
            if (cur().kind == Tok::Star || cur().kind == Tok::Slash) {
                const BinaryOp op = cur().kind == Tok::Star ? BinaryOp::Mul : BinaryOp::Div;
                const SourcePos pos = cur().pos;
                advance();
                ExprPtr rhs = parse_factor(element_ctx);
                lhs = make({Binary{op, std::move(lhs), std::move(rhs)}, pos});
            } else {
                return lhs;
            }
        }
    }

    ExprPtr parse_factor(bool element_ctx) {
        if (cur().kind == Tok::Minus) {
            const SourcePos pos = cur().pos;
            advance();
            ExprPtr arg = parse_factor(element_ctx);
            return make({Unary{UnaryFn::Neg, std::move(arg)}, pos});
        }
        return parse_power(element_ctx);
    }

    ExprPtr parse_power(bool element_ctx) {
        ExprPtr base = parse_atom(element_ctx);
        if (cur().kind == Tok::Caret) {
            const SourcePos pos = cur().pos;
            advance();
            ExprPtr exponent = parse_factor(element_ctx);  // right-assoc, may be negated
            return make({Binary{BinaryOp::Pow, std::move(base), std::move(exponent)}, pos});
        }
        return base;
    }

    ExprPtr parse_atom(bool element_ctx) {
        const Token tok = cur();
        switch (tok.kind) {
            case Tok::Number:
                advance();
                return make({Literal{tok.number}, tok.pos});
            case Tok::LParen: {
                advance();
                ExprPtr e = parse_expr(element_ctx);
                expect(Tok::RParen, "expected ')'");
                return e;
            }
            case Tok::Ident:
                return parse_ident(element_ctx);
            default:
                throw SyntaxError(tok.pos, tok.text, "expected a value");
        }
    }

    ExprPtr parse_ident(bool element_ctx) {
        const Token tok = cur();
        advance();
        const std::string& name = tok.text;

        if (name == "f") {
            if (cur().kind == Tok::LBracket)
                throw SyntaxError(cur().pos, cur().text, "f is a scalar and cannot be indexed");
            return make({FeeVar{}, tok.pos});
        }

        if (auto vid = vector_id(name)) {
            if (cur().kind == Tok::LBracket) {
                advance();
                if (cur().kind != Tok::Number)
                    throw SyntaxError(cur().pos, cur().text, "expected an integer index");
                const Token idx = cur();
                double int_part = 0.0;
                if (std::modf(idx.number, &int_part) != 0.0 || idx.number < 1.0)
                    throw SyntaxError(idx.pos, idx.text, "index must be a positive integer");
                advance();
                expect(Tok::RBracket, "expected ']'");
                return make({Element{*vid, static_cast<int>(idx.number)}, tok.pos});
            }
            if (!element_ctx)
                throw SyntaxError(tok.pos, name,
                                  "bare vector is only valid inside dot/sum/norm2; use an index "
                                  "like " + name + "[1] here");
            return make({VectorRef{*vid}, tok.pos});
        }

        if (name == "ln" || name == "exp" || name == "sqrt" || name == "abs") {
            const UnaryFn fn = name == "ln"    ? UnaryFn::Ln
                               : name == "exp" ? UnaryFn::Exp
                               : name == "sqrt" ? UnaryFn::Sqrt
                                                : UnaryFn::Abs;
            auto args = parse_args(tok, element_ctx, 1);
            return make({Unary{fn, std::move(args[0])}, tok.pos});
        }
        if (name == "min" || name == "max") {
            const MinMaxFn fn = name == "min" ? MinMaxFn::Min : MinMaxFn::Max;
            auto args = parse_args(tok, element_ctx, 2);
            return make({MinMax{fn, std::move(args[0]), std::move(args[1])}, tok.pos});
        }
        if (name == "dot") {
            auto args = parse_args(tok, /*element_ctx=*/true, 2);
            return make({Dot{std::move(args[0]), std::move(args[1])}, tok.pos});
        }
        if (name == "sum" || name == "norm2") {
            const AggregateFn fn = name == "sum" ? AggregateFn::Sum : AggregateFn::Norm2;
            auto args = parse_args(tok, /*element_ctx=*/true, 1);
            return make({Aggregate{fn, std::move(args[0])}, tok.pos});
        }

        throw UnknownIdentifier(tok.pos, name);
    }

    static std::optional<VectorId> vector_id(const std::string& name) {
        if (name == "p") return VectorId::Prices;
        if (name == "R") return VectorId::Reserves;
        if (name == "delta") return VectorId::Delta;
        if (name == "wstar") return VectorId::TargetWeights;
        return std::nullopt;
    }

    std::vector<ExprPtr> parse_args(const Token& fn_tok, bool element_ctx, int expected) {
        expect(Tok::LParen, "expected '(' after function name");
        std::vector<ExprPtr> args;
        if (cur().kind != Tok::RParen) {
            args.push_back(parse_expr(element_ctx));
            while (cur().kind == Tok::Comma) {
                advance();
                args.push_back(parse_expr(element_ctx));
            }
        }
        expect(Tok::RParen, "expected ')'");
        if (static_cast<int>(args.size()) != expected)
            throw ArityError(fn_tok.pos, fn_tok.text, expected, static_cast<int>(args.size()));
        return args;
    }

    Lexer lex_;
};

}  // namespace

ExprPtr parse(std::string_view source) { return Parser(source).run(); }

// ---------------------------------------------------------------------------
// Pretty printer
// ---------------------------------------------------------------------------

namespace {

int precedence(const Expr& e) {
    if (const auto* b = std::get_if<Binary>(&e.node)) {
        switch (b->op) {
            case BinaryOp::Add:
            case BinaryOp::Sub: return 1;
            case BinaryOp::Mul:
            case BinaryOp::Div: return 2;
            case BinaryOp::Pow: return 4;
        }
    }
    if (const auto* u = std::get_if<Unary>(&e.node))
        if (u->fn == UnaryFn::Neg) return 3;
    return 5;  // atoms and call syntax
}

// Shortest fixed-notation string that round-trips the double: the surface
// syntax has no scientific notation, so the printer must not emit any.
// Literal values are nonnegative by construction (negation is a node).
std::string number_str(double v) {
    char buf[1100];  // fixed notation for denormals runs to ~330 characters
    auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
    return std::string(buf, r.ptr);
}

const char* vector_name(VectorId id) {
    switch (id) {
        case VectorId::Prices: return "p";
        case VectorId::Reserves: return "R";
        case VectorId::Delta: return "delta";
        case VectorId::TargetWeights: return "wstar";
    }
    return "?";
}

void print(const Expr& e, std::string& out);

void print_child(const Expr& child, int parent_prec, bool needs_paren_on_equal,
                 std::string& out) {
    const int cp = precedence(child);
    const bool paren = cp < parent_prec || (cp == parent_prec && needs_paren_on_equal);
    if (paren) out += '(';
    print(child, out);
    if (paren) out += ')';
}

void print(const Expr& e, std::string& out) {
    std::visit(
        [&](const auto& node) {
            using T = std::decay_t<decltype(node)>;
            if constexpr (std::is_same_v<T, Literal>) {
                out += number_str(node.value);
            } else if constexpr (std::is_same_v<T, FeeVar>) {
                out += 'f';
            } else if constexpr (std::is_same_v<T, VectorRef>) {
                out += vector_name(node.id);
            } else if constexpr (std::is_same_v<T, Element>) {
                out += vector_name(node.id);
                out += '[';
                out += std::to_string(node.index);
                out += ']';
            } else if constexpr (std::is_same_v<T, Unary>) {
                if (node.fn == UnaryFn::Neg) {
                    out += '-';
                    print_child(*node.arg, 3, false, out);
                } else {
                    out += node.fn == UnaryFn::Ln    ? "ln"
                           : node.fn == UnaryFn::Exp ? "exp"
                           : node.fn == UnaryFn::Sqrt ? "sqrt"
                                                      : "abs";
                    out += '(';
                    print(*node.arg, out);
                    out += ')';
                }
            } else if constexpr (std::is_same_v<T, Binary>) {
                const int prec = node.op == BinaryOp::Pow ? 4
                                 : (node.op == BinaryOp::Mul || node.op == BinaryOp::Div) ? 2
                                                                                          : 1;
                const char* sym = node.op == BinaryOp::Add   ? " + "
                                  : node.op == BinaryOp::Sub ? " - "
                                  : node.op == BinaryOp::Mul ? "*"
                                  : node.op == BinaryOp::Div ? "/"
                                                             : "^";
                if (node.op == BinaryOp::Pow) {
                    // right-associative: parenthesize left child on equal precedence
                    print_child(*node.lhs, prec, true, out);
                    out += sym;
                    print_child(*node.rhs, prec, false, out);
                } else {
                    // left-associative: parenthesize right child on equal precedence
                    print_child(*node.lhs, prec, false, out);
                    out += sym;
                    print_child(*node.rhs, prec, true, out);
                }
            } else if constexpr (std::is_same_v<T, MinMax>) {
                out += node.fn == MinMaxFn::Min ? "min(" : "max(";
                print(*node.a, out);
                out += ", ";
                print(*node.b, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, Aggregate>) {
                out += node.fn == AggregateFn::Sum ? "sum(" : "norm2(";
                print(*node.arg, out);
                out += ')';
            } else if constexpr (std::is_same_v<T, Dot>) {
                out += "dot(";
                print(*node.a, out);
                out += ", ";
                print(*node.b, out);
                out += ')';
            }
        },
        e.node);
}

}  // namespace

std::string pretty_print(const Expr& e) {
    std::string out;
    print(e, out);
    return out;
}

bool structurally_equal(const Expr& a, const Expr& b) {
    if (a.node.index() != b.node.index()) return false;
    return std::visit(
        [&](const auto& na) {
            using T = std::decay_t<decltype(na)>;
            const auto& nb = std::get<T>(b.node);
            if constexpr (std::is_same_v<T, Literal>) {
                return na.value == nb.value;
            } else if constexpr (std::is_same_v<T, FeeVar>) {
                return true;
            } else if constexpr (std::is_same_v<T, VectorRef>) {
                return na.id == nb.id;
            } else if constexpr (std::is_same_v<T, Element>) {
                return na.id == nb.id && na.index == nb.index;
            } else if constexpr (std::is_same_v<T, Unary>) {
                return na.fn == nb.fn && structurally_equal(*na.arg, *nb.arg);
            } else if constexpr (std::is_same_v<T, Binary>) {
                return na.op == nb.op && structurally_equal(*na.lhs, *nb.lhs) &&
                       structurally_equal(*na.rhs, *nb.rhs);
            } else if constexpr (std::is_same_v<T, MinMax>) {
                return na.fn == nb.fn && structurally_equal(*na.a, *nb.a) &&
                       structurally_equal(*na.b, *nb.b);
            } else if constexpr (std::is_same_v<T, Aggregate>) {
                return na.fn == nb.fn && structurally_equal(*na.arg, *nb.arg);
            } else {
                static_assert(std::is_same_v<T, Dot>);
                return structurally_equal(*na.a, *nb.a) && structurally_equal(*na.b, *nb.b);
            }
        },
        a.node);
}

// ---------------------------------------------------------------------------
// Evaluation (shared by plain and dual sweeps)
// ---------------------------------------------------------------------------

namespace {

constexpr int kNoIndex = -1;

template <class Num>
struct Machine;

// Plain IEEE evaluation.
template <>
struct Machine<double> {
    static double constant(double v, std::size_t) { return v; }
    static double leaf(double v, std::size_t, std::size_t, bool) { return v; }
    static double value_of(double x) { return x; }
    static bool constant_exponent(double) { return true; }
};

// Forward-mode dual evaluation.
template <>
struct Machine<DualVector> {
    static DualVector constant(double v, std::size_t n) { return DualVector::constant(v, n); }
    static DualVector leaf(double v, std::size_t n, std::size_t slot, bool seeded) {
        return seeded ? DualVector::seeded(v, n, slot) : DualVector::constant(v, n);
    }
    static double value_of(const DualVector& x) { return x.value(); }
    static bool constant_exponent(const DualVector& x) { return x.constant_tangent(); }
};

template <class Num>
class Evaluator {
public:
    Evaluator(const Env& env, std::optional<GradTarget> target) : env_(env), target_(target) {
        n_ = env.prices.size();
        check_width(env.target_weights, "wstar");
        check_width(env.reserves, "R");
        check_width(env.delta, "delta");
    }

    Num run(const Expr& e) { return eval(e, kNoIndex); }

private:
    using M = Machine<Num>;

    void check_width(std::span<const double> v, const char* name) {
        if (!v.empty() && v.size() != n_)
            throw Error(std::string("environment vector '") + name +
                        "' does not match prices length");
    }

    double raw(VectorId id, std::size_t i, const Expr& site) const {
        const std::span<const double> v = id == VectorId::Prices          ? env_.prices
                                          : id == VectorId::Reserves      ? env_.reserves
                                          : id == VectorId::Delta         ? env_.delta
                                                                          : env_.target_weights;
        if (v.empty()) return 0.0;
        if (i >= v.size())
            throw DomainError(site.pos, std::string("index ") + std::to_string(i + 1) +
                                            " out of range for " + vector_name(id) + " (n=" +
                                            std::to_string(v.size()) + ")");
        return v[i];
    }

    bool seeded_vector(VectorId id) const {
        if (!target_) return false;
        return (*target_ == GradTarget::Prices && id == VectorId::Prices) ||
               (*target_ == GradTarget::Delta && id == VectorId::Delta);
    }

    Num component(VectorId id, std::size_t i, const Expr& site) const {
        return M::leaf(raw(id, i, site), n_, i, seeded_vector(id));
    }

    Num eval(const Expr& e, int elem) {
        return std::visit(
            [&](const auto& node) -> Num {
                using T = std::decay_t<decltype(node)>;
                if constexpr (std::is_same_v<T, Literal>) {
                    return M::constant(node.value, n_);
                } else if constexpr (std::is_same_v<T, FeeVar>) {
                    return M::constant(env_.fee_rate, n_);
                } else if constexpr (std::is_same_v<T, VectorRef>) {
                    assert(elem != kNoIndex);  // parser rejects scalar-context bare vectors
                    return component(node.id, static_cast<std::size_t>(elem), e);
                } else if constexpr (std::is_same_v<T, Element>) {
                    return component(node.id, static_cast<std::size_t>(node.index - 1), e);
                } else if constexpr (std::is_same_v<T, Unary>) {
                    return eval_unary(node, e, elem);
                } else if constexpr (std::is_same_v<T, Binary>) {
                    return eval_binary(node, e, elem);
                } else if constexpr (std::is_same_v<T, MinMax>) {
                    return eval_minmax(node, e, elem);
                } else if constexpr (std::is_same_v<T, Aggregate>) {
                    return eval_aggregate(node, e, elem);
                } else {
                    static_assert(std::is_same_v<T, Dot>);
                    Num acc = M::constant(0.0, n_);
                    for (std::size_t i = 0; i < n_; ++i) {
                        Num ai = eval(*node.a, static_cast<int>(i));
                        Num bi = eval(*node.b, static_cast<int>(i));
                        acc = acc + ai * bi;
                    }
                    return acc;
                }
            },
            e.node);
    }

    Num eval_unary(const Unary& node, const Expr& site, int elem) {
        Num x = eval(*node.arg, elem);
        const double xv = M::value_of(x);
        switch (node.fn) {
            case UnaryFn::Neg:
                return -x;
            case UnaryFn::Ln:
                if (!(xv > 0.0)) throw DomainError(site.pos, "ln of a non-positive value");
                return chain(x, std::log(xv), 1.0 / xv);
            case UnaryFn::Exp: {
                const double v = std::exp(xv);
                return chain(x, v, v);
            }
            case UnaryFn::Sqrt:
                if (xv < 0.0) throw DomainError(site.pos, "sqrt of a negative value");
                if constexpr (std::is_same_v<Num, DualVector>) {
                    if (xv == 0.0 && !x.constant_tangent())
                        throw DomainError(site.pos, "sqrt derivative is unbounded at zero");
                }
                return chain(x, std::sqrt(xv), xv > 0.0 ? 0.5 / std::sqrt(xv) : 0.0);
            case UnaryFn::Abs:
                if constexpr (std::is_same_v<Num, DualVector>) {
                    if (xv == 0.0 && !x.constant_tangent())
                        throw NondifferentiablePoint(site.pos, "abs at zero");
                }
                return chain(x, std::abs(xv), xv >= 0.0 ? 1.0 : -1.0);
        }
        throw Error("unreachable unary");
    }

    Num eval_binary(const Binary& node, const Expr& site, int elem) {
        Num a = eval(*node.lhs, elem);
        Num b = eval(*node.rhs, elem);
        const double av = M::value_of(a);
        const double bv = M::value_of(b);
        switch (node.op) {
            case BinaryOp::Add: return a + b;
            case BinaryOp::Sub: return a - b;
            case BinaryOp::Mul: return a * b;
            case BinaryOp::Div:
                if (bv == 0.0) throw DomainError(site.pos, "division by zero");
                return combine(a, b, av / bv, 1.0 / bv, -av / (bv * bv));
            case BinaryOp::Pow: return eval_pow(a, b, site);
        }
        throw Error("unreachable binary");
    }

    Num eval_pow(const Num& a, const Num& b, const Expr& site) {
        const double av = M::value_of(a);
        const double bv = M::value_of(b);
        const bool const_exp = M::constant_exponent(b);
        if (!const_exp) {
            // varying exponent: a^b = exp(b ln a), needs a > 0
            if (!(av > 0.0))
                throw DomainError(site.pos, "base of '^' must be positive when the exponent varies");
            const double v = std::pow(av, bv);
            return combine(a, b, v, v * bv / av, v * std::log(av));
        }
        const bool integer_exp = std::nearbyint(bv) == bv && std::abs(bv) < 1e15;
        if (av < 0.0 && !integer_exp)
            throw DomainError(site.pos, "negative base with a non-integer exponent");
        if (av == 0.0) {
            if (bv < 0.0) throw DomainError(site.pos, "zero base with a negative exponent");
            if constexpr (std::is_same_v<Num, DualVector>) {
                if (!a.constant_tangent() && bv > 0.0 && bv < 1.0)
                    throw DomainError(site.pos, "derivative of x^c is unbounded at zero for c < 1");
            }
            const double v = std::pow(av, bv);
            const double slope = bv == 1.0 ? 1.0 : 0.0;  // c*x^(c-1) at 0, c >= 1 or c == 0
            return chain(a, v, slope);
        }
        const double v = std::pow(av, bv);
        return chain(a, v, bv * std::pow(av, bv - 1.0));
    }

    Num eval_minmax(const MinMax& node, const Expr& site, int elem) {
        Num a = eval(*node.a, elem);
        Num b = eval(*node.b, elem);
        const double av = M::value_of(a);
        const double bv = M::value_of(b);
        if constexpr (std::is_same_v<Num, DualVector>) {
            if (av == bv && !(a - b).constant_tangent())
                throw NondifferentiablePoint(
                    site.pos, node.fn == MinMaxFn::Min ? "exact min tie" : "exact max tie");
        }
        const bool pick_a = node.fn == MinMaxFn::Min ? (av <= bv) : (av >= bv);
        return pick_a ? a : b;
    }

    Num eval_aggregate(const Aggregate& node, const Expr& site, int) {
        Num acc = M::constant(0.0, n_);
        if (node.fn == AggregateFn::Sum) {
            for (std::size_t i = 0; i < n_; ++i) acc = acc + eval(*node.arg, static_cast<int>(i));
            return acc;
        }
        // norm2: Euclidean norm of the elementwise argument
        for (std::size_t i = 0; i < n_; ++i) {
            Num x = eval(*node.arg, static_cast<int>(i));
            acc = acc + x * x;
        }
        const double sv = M::value_of(acc);
        if constexpr (std::is_same_v<Num, DualVector>) {
            if (sv == 0.0 && !acc.constant_tangent())
                throw DomainError(site.pos, "norm2 derivative is unbounded at zero");
        }
        return chain(acc, std::sqrt(sv), sv > 0.0 ? 0.5 / std::sqrt(sv) : 0.0);
    }

    // chain/combine helpers that collapse to plain arithmetic for doubles
    static Num chain(const Num& x, double value, double slope) {
        if constexpr (std::is_same_v<Num, double>) {
            (void)x;
            (void)slope;
            return value;
        } else {
            return x.chain(value, slope);
        }
    }

    static Num combine(const Num& a, const Num& b, double value, double da, double db) {
        if constexpr (std::is_same_v<Num, double>) {
            (void)a;
            (void)b;
            (void)da;
            (void)db;
            return value;
        } else {
            return DualVector::combine(value, da, a, db, b);
        }
    }

    const Env& env_;
    std::optional<GradTarget> target_;
    std::size_t n_ = 0;
};

}  // namespace

double eval(const Expr& e, const Env& env) {
    const double v = Evaluator<double>(env, std::nullopt).run(e);
    if (std::isnan(v)) throw DomainError(e.pos, "expression evaluated to NaN");
    return v;
}

GradResult grad(const Expr& e, const Env& env, GradTarget target) {
    DualVector out = Evaluator<DualVector>(env, target).run(e);
    if (std::isnan(out.value())) throw DomainError(e.pos, "expression evaluated to NaN");
    for (double d : out.partials())
        if (std::isnan(d)) throw DomainError(e.pos, "gradient evaluated to NaN");
    return {out.value(), out.partials()};
}

}  // namespace twm::fexpr
