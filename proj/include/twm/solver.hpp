#pragma once

#include <cstdint>
#include <span>

#include "twm/discount.hpp"
#include "twm/pool.hpp"

namespace twm {

struct SolverConfig {
    int max_iterations = 10000;
    double gradient_tolerance = 1e-9;  // on the projected-gradient norm
    double initial_step = 1.0;
    double backtracking_factor = 0.5;
    double armijo_constant = 1e-4;
    int starts = 5;  // multi-start count for non-uniqueness detection
    std::uint64_t seed = 0;
};

struct SolveResult {
    Vec delta_hat;
    double objective = 0.0;
    Vec achieved_weights;  // empty when p.(R+delta) = 0 leaves weights undefined
    bool converged = false;
    int iterations = 0;               // total across starts
    double stationarity_residual = 0.0;
    bool unique = true;  // false when distinct optima tie on the objective
};

/// Maximizes F over reserve changes keeping R + delta >= 0, by projected
/// gradient ascent with Armijo backtracking. Concavity (C2) makes any
/// stationary point a global maximizer; multi-start flags flat objectives.
SolveResult solve_arbitrage(const DiscountFunction& f, const PoolState& state,
                            const WeightVector& wstar, const SolverConfig& config = {});

/// Post-hoc certificate: || P(d + grad F(d)) - d ||_inf with P the projection
/// onto the feasible box. Zero exactly at stationary points.
double verify_stationarity(const DiscountFunction& f, const PoolState& state,
                           const WeightVector& wstar, std::span<const double> delta_hat);

}  // namespace twm
