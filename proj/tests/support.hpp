#pragma once

// Shared fixtures for the test binaries: canonical demo states, an owning
// expression environment, finite-difference oracles with kink guards, and
// the seeded random expression corpus used by the round-trip and autodiff
// tests.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "twm/discount.hpp"
#include "twm/fexpr.hpp"
#include "twm/linalg.hpp"
#include "twm/pool.hpp"
#include "twm/rng.hpp"

namespace twmtest {

// ---------------------------------------------------------------------------
// Canonical states
// ---------------------------------------------------------------------------

/// Two-asset demo pool: p = (1,1), R = (3,1), one unit of asset 1 lent out,
/// 10% fee. Used wherever a hand-checkable state is wanted.
inline twm::PoolState demo_state() {
    twm::PoolState s;
    s.prices = {1.0, 1.0};
    s.reserves = {3.0, 1.0};
    s.lent = {1.0, 0.0};
    s.fee_rate = 0.1;
    return s;
}

inline twm::WeightVector half_half() { return twm::WeightVector({0.5, 0.5}); }

/// Stiffness 2*I for the two-asset quadratic; with demo_state() and equal
/// target weights the value-preserving rebalance is exactly (-1, 1).
inline twm::SymMatrix stiffness_2i() {
    twm::SymMatrix b = twm::SymMatrix::identity(2);
    b.scale(2.0);
    return b;
}

// ---------------------------------------------------------------------------
// Owning expression environment
// ---------------------------------------------------------------------------

/// fexpr::Env is a bundle of spans; this owns the storage behind one.
struct OwnedEnv {
    twm::Vec prices;
    twm::Vec target_weights;
    twm::Vec reserves;
    twm::Vec delta;
    double fee_rate = 0.0;

    twm::fexpr::Env view() const {
        return {prices, target_weights, reserves, delta, fee_rate};
    }
};

inline OwnedEnv sample_env(twm::Rng& rng, std::size_t n) {
    OwnedEnv env;
    env.prices.resize(n);
    env.target_weights.resize(n);
    env.reserves.resize(n);
    env.delta.resize(n);
    double wsum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        env.prices[i] = rng.log_uniform(0.5, 2.0);
        env.target_weights[i] = 0.1 + rng.u01();
        wsum += env.target_weights[i];
        env.reserves[i] = rng.uniform(0.5, 2.0);
        env.delta[i] = rng.uniform(-0.3, 0.3);
    }
    for (std::size_t i = 0; i < n; ++i) env.target_weights[i] /= wsum;
    env.fee_rate = rng.uniform(0.05, 0.3);
    return env;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle for expression gradients
// ---------------------------------------------------------------------------

struct FdExprGradient {
    bool defined = false;        // base point (and every bump) evaluated
    twm::Vec gradient;           // central differences
    std::vector<bool> kink;      // one-sided slopes disagree: do not compare
};

/// Central differences on the target vector with relative steps. Components
/// where the forward and backward slopes disagree are flagged as kinks
/// (abs/min/max branch switches between the bumps) instead of compared.
inline FdExprGradient fd_grad_expr(const twm::fexpr::Expr& e, const OwnedEnv& base,
                                   twm::fexpr::GradTarget target, double rel_step = 1e-6) {
    using twm::fexpr::GradTarget;
    FdExprGradient out;
    const std::size_t n = base.prices.size();
    out.gradient.assign(n, 0.0);
    out.kink.assign(n, false);

    const auto eval_at = [&](const OwnedEnv& env) -> std::optional<double> {
        try {
            const double v = twm::fexpr::eval(e, env.view());
            if (!std::isfinite(v)) return std::nullopt;
            return v;
        } catch (const twm::Error&) {
            return std::nullopt;
        }
    };

    const auto base_value = eval_at(base);
    if (!base_value) return out;

    for (std::size_t i = 0; i < n; ++i) {
        OwnedEnv up = base;
        OwnedEnv down = base;
        double h = 0.0;
        if (target == GradTarget::Prices) {
            h = rel_step * base.prices[i];
            up.prices[i] += h;
            down.prices[i] -= h;
        } else {
            h = rel_step * (1.0 + std::abs(base.delta[i]));
            up.delta[i] += h;
            down.delta[i] -= h;
        }
        const auto vu = eval_at(up);
        const auto vd = eval_at(down);
        if (!vu || !vd) return out;  // bump left the domain: give up on the env
        out.gradient[i] = (*vu - *vd) / (2.0 * h);
        const double fwd = (*vu - *base_value) / h;
        const double bwd = (*base_value - *vd) / h;
        if (std::abs(fwd - bwd) > 1e-3 * (1.0 + std::abs(fwd) + std::abs(bwd)))
            out.kink[i] = true;
    }
    out.defined = true;
    return out;
}

// ---------------------------------------------------------------------------
// Random expression corpus
// ---------------------------------------------------------------------------

/// Fixed literal format; three decimals keeps the decimal-only lexer happy
/// and the values well scaled.
inline std::string corpus_literal(twm::Rng& rng) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f", rng.uniform(0.1, 3.0));
    return buf;
}

inline std::string corpus_vector_name(twm::Rng& rng) {
    static const char* names[] = {"p", "R", "wstar", "delta"};
    return names[rng.index(4)];
}

inline std::string corpus_indexed(twm::Rng& rng, std::size_t n) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s[%zu]", corpus_vector_name(rng).c_str(),
                  rng.index(n) + 1);
    return buf;
}

/// Random expression source with depth budget `depth`. `element` marks
/// aggregate-argument position, where bare vector names are legal. The
/// generator biases ln/sqrt/division arguments toward guarded forms so that
/// a usable fraction of the corpus evaluates cleanly; the rejection logic in
/// the tests handles the rest.
inline std::string random_expr_source(twm::Rng& rng, int depth, bool element, std::size_t n) {
    if (depth <= 0 || rng.u01() < 0.18) {
        const double pick = rng.u01();
        if (element && pick < 0.3) return corpus_vector_name(rng);
        if (pick < 0.45) return corpus_literal(rng);
        if (pick < 0.55) return "f";
        return corpus_indexed(rng, n);
    }
    const auto sub = [&](bool elem) { return random_expr_source(rng, depth - 1, elem, n); };
    switch (rng.index(12)) {
        case 0: return "(" + sub(element) + " + " + sub(element) + ")";
        case 1: return "(" + sub(element) + " - " + sub(element) + ")";
        case 2: return "(" + sub(element) + " * " + sub(element) + ")";
        case 3:
            if (rng.u01() < 0.7) return "(" + sub(element) + " / (abs(" + sub(element) + ") + 1))";
            return "(" + sub(element) + " / " + sub(element) + ")";
        case 4:
            if (rng.u01() < 0.7) return "((abs(" + sub(element) + ") + 0.5) ^ 2)";
            return "(" + sub(element) + " ^ 2)";
        case 5: return "-(" + sub(element) + ")";
        case 6:
            if (rng.u01() < 0.7) return "ln(abs(" + sub(element) + ") + 1)";
            return "ln(" + sub(element) + ")";
        case 7: return "exp(-(abs(" + sub(element) + ")))";
        case 8:
            if (rng.u01() < 0.7) return "sqrt(abs(" + sub(element) + ") + 0.25)";
            return "sqrt(" + sub(element) + ")";
        case 9:
            return (rng.u01() < 0.5 ? "min(" : "max(") + sub(element) + ", " + sub(element) + ")";
        case 10: return "dot(" + sub(true) + ", " + sub(true) + ")";
        case 11:
            return (rng.u01() < 0.5 ? "sum(" : "norm2(") + sub(true) + ")";
    }
    return corpus_literal(rng);  // unreachable
}

struct Corpus {
    std::vector<std::string> sources;
    std::size_t dimension = 3;
};

/// The seeded 50-expression corpus (depth <= 6) shared by the unit tests and
/// the acceptance gate.
inline Corpus expression_corpus(std::uint64_t seed = 0x636f7270u, int count = 50) {
    Corpus c;
    twm::Rng rng(seed);
    c.sources.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        c.sources.push_back(random_expr_source(rng, 6, false, c.dimension));
    return c;
}

}  // namespace twmtest
