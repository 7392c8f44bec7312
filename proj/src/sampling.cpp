#include "twm/sampling.hpp"

namespace twm {

Vec sample_prices(Rng& rng, const StateSamplerOptions& opt) {
    Vec p(opt.dimension);
    for (double& x : p) x = rng.log_uniform(opt.price_min, opt.price_max);
    return p;
}

WeightVector sample_simplex(Rng& rng, const StateSamplerOptions& opt) {
    const std::size_t n = opt.dimension;
    Vec w(n);
    double sum = 0.0;
    for (double& x : w) {
        x = opt.weight_floor + rng.u01();
        sum += x;
    }
    for (double& x : w) x /= sum;
    return WeightVector(std::move(w));
}

PoolState sample_state(Rng& rng, const StateSamplerOptions& opt) {
    PoolState s;
    s.prices = sample_prices(rng, opt);
    s.reserves.resize(opt.dimension);
    s.lent.resize(opt.dimension);
    for (double& r : s.reserves) r = rng.uniform(opt.reserve_min, opt.reserve_max);
    for (double& l : s.lent) l = rng.uniform(0.0, opt.lent_max);
    s.fee_rate = rng.uniform(opt.fee_min, opt.fee_max);
    return s;
}

Vec sample_feasible_delta(Rng& rng, std::span<const double> reserves) {
    Vec d(reserves.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        d[i] = -reserves[i] + rng.u01() * (2.0 * reserves[i] + 1.0);
    return d;
}

SymMatrix sample_spd_matrix(Rng& rng, std::size_t n) {
    std::vector<Vec> a(n, Vec(n));
    for (auto& row : a)
        for (double& x : row) x = rng.uniform(-1.0, 1.0);
    SymMatrix m(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += a[k][i] * a[k][j];
            m.set(i, j, s / static_cast<double>(n) + (i == j ? 0.5 : 0.0));
        }
    return m;
}

void pin_to_target(PoolState& state, const WeightVector& wstar, double total_value) {
    for (std::size_t i = 0; i < state.size(); ++i)
        state.reserves[i] = wstar[i] * total_value / state.prices[i];
}

}  // namespace twm
