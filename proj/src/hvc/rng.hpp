#pragma once

// Seeded RNG with distributions implemented in-house. std:: distributions
// are implementation-defined, so only the mt19937_64 engine (whose output
// sequence the standard pins down) is used from the library.

#include <cstdint>
#include <random>

#include "hvc/detmath.hpp"

namespace hvc {

class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) { return eng_() % n; }

    // Standard normal via inverse-CDF (deterministic across platforms).
    double normal() {
        double u;
        do {
            u = uniform01();
        } while (u <= 0.0);
        return detmath::norm_icdf(u);
    }

    // Normal truncated to +-2 sigma, resampled.
    double trunc_normal(double stddev) {
        double x;
        do {
            x = normal();
        } while (x < -2.0 || x > 2.0);
        return x * stddev;
    }

  private:
    std::mt19937_64 eng_;
};

// Derives an independent stream for a sub-task (step, batch item, frame, ...)
// from a master seed. splitmix64-style mixing.
inline uint64_t derive_seed(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t z = seed;
    for (uint64_t v : {a + 1, b + 1, c + 1}) {
        z += 0x9e3779b97f4a7c15ull * v;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z = z ^ (z >> 31);
    }
    return z;
}

} // namespace hvc
