#pragma once

#include <cstdint>

#include "twm/linalg.hpp"
#include "twm/pool.hpp"
#include "twm/rng.hpp"

namespace twm {

/// Ranges for random pool states. Prices are log-uniform so sampled states
/// span magnitudes; reserves stay bounded away from zero unless asked.
struct StateSamplerOptions {
    std::size_t dimension = 2;
    double price_min = 0.25;
    double price_max = 4.0;
    double reserve_min = 0.25;
    double reserve_max = 4.0;
    double lent_max = 2.0;       // per asset, uniform in [0, lent_max]
    double fee_min = 0.01;
    double fee_max = 0.5;
    double weight_floor = 0.05;  // keeps target weights strictly interior
};

Vec sample_prices(Rng& rng, const StateSamplerOptions& opt);

/// Interior simplex point with every coordinate >= weight_floor / dimension.
WeightVector sample_simplex(Rng& rng, const StateSamplerOptions& opt);

PoolState sample_state(Rng& rng, const StateSamplerOptions& opt);

/// Feasible reserve change: delta_i in [-R_i, R_i + 1].
Vec sample_feasible_delta(Rng& rng, std::span<const double> reserves);

/// Symmetric positive definite matrix with eigenvalues in roughly [0.5, 2.5]:
/// A'A scaled down plus a half-identity shift.
SymMatrix sample_spd_matrix(Rng& rng, std::size_t n);

/// Rewrites reserves so the marked weights equal wstar (R_i = w*_i c / p_i).
void pin_to_target(PoolState& state, const WeightVector& wstar, double total_value);

}  // namespace twm
