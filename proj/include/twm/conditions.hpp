#pragma once

#include <cstdint>
#include <optional>

#include "twm/discount.hpp"
#include "twm/pool.hpp"
#include "twm/sampling.hpp"
#include "twm/solver.hpp"

namespace twm {

struct SamplerConfig {
    int samples = 1000;
    std::uint64_t seed = 0;
    std::size_t dimension = 2;
};

/// "No discount at delta = 0": max |F(p, w*, R, 0)| over sampled states.
/// Under the Weak reading samples are restricted to states already at the
/// target weights.
struct C1Report {
    bool pass = false;
    double max_abs_residual = 0.0;
    int samples_used = 0;
    std::uint64_t seed = 0;
    C1Reading reading = C1Reading::Strong;
    double tolerance = 1e-10;
};

C1Report check_c1(const DiscountFunction& f, const SamplerConfig& cfg);

/// Concavity in delta, certified by randomized midpoint sampling: sound as a
/// refuter, probabilistic as a verifier.
struct C2Report {
    bool pass = false;
    double worst_violation = 0.0;  // positive means concavity refuted
    int samples_used = 0;
    std::uint64_t seed = 0;
    double tolerance = 1e-9;
};

C2Report check_c2_concavity(const DiscountFunction& f, const PoolState& state,
                            const WeightVector& wstar, const SamplerConfig& cfg);

/// The best response must land on the target weights, and must be the only
/// optimum doing so (a flat argmax fails).
struct C3Report {
    bool pass = false;
    double weight_error = 0.0;  // || w(p, R+delta_hat) - w* ||_inf
    SolveResult solve;
    double tolerance = 1e-6;
};

C3Report check_c3_target(const DiscountFunction& f, const PoolState& state,
                         const WeightVector& wstar, const SolverConfig& cfg = {});

struct ConditionReport {
    std::optional<C1Report> c1;
    std::optional<C2Report> c2;
    std::optional<C3Report> c3;
};

}  // namespace twm
