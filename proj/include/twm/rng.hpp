#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace twm {

/// Seeded random source with hand-mapped distributions so that streams are
/// identical across platforms and standard-library versions (std::mt19937_64
/// is fully specified, the std distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

    /// Derives an independent stream for a named sub-task; deterministic.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
        // splitmix64 finalizer over seed ^ salt
        std::uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace twm
