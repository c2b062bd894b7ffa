// Seeded random number generation with a fixed bit-level contract, so that
// every seeded code path reproduces bit-identically across runs and platforms.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace spdmotion {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform double in [0, 1). Does not use std::uniform_real_distribution,
    /// whose output sequence is implementation-defined.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t index(std::uint64_t n) {
        // modulo bias is irrelevant at these ranges (n << 2^64)
        return engine_() % n;
    }

    /// Standard normal via Box-Muller (deterministic, stateless between calls).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Derive an independent child stream (e.g. one per epoch or per cell).
    Rng fork(std::uint64_t salt) {
        return Rng(engine_() ^ (salt * 0x9e3779b97f4a7c15ull));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace spdmotion
