#pragma once

#include <cstdint>
#include <cmath>
#include <random>

// Seeded random streams with hand-rolled distributions.
//
// std::mt19937_64 is bit-exact across platforms, but the standard
// *distributions* are not; uniform and normal variates are therefore
// generated here explicitly so that equal seeds give bitwise-equal
// sample streams (and bitwise-equal CSV output) everywhere.
//
// Worker/replica streams follow the documented contract
// seed = base_seed + replica_index, premixed through splitmix64 so that
// adjacent seeds give decorrelated engine states.

namespace mzlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class rng {
  public:
    explicit rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    // Uniform in [0,1) with 53 random bits.
    double uniform() {
        return double(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via the polar (Marsaglia) method; second variate cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::uint64_t raw() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Stream for worker/replica `index` derived from a base seed.
inline rng replica_rng(std::uint64_t base_seed, std::uint64_t index) {
    return rng(base_seed + index);
}

}  // namespace mzlab
