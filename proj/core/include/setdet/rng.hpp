// Seeded random source with a fixed, platform-independent bit stream.
// std::mt19937 + distributions are implementation-defined, which would break
// the bit-identical reproducibility contract, so we roll our own.
#pragma once

#include <cmath>
#include <cstdint>

namespace setdet {

// splitmix64: tiny state, high quality, and trivially splittable by key
// derivation. Every stochastic component in the project draws from this.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1), both endpoints excluded
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 12) + 0.5) * 0x1.0p-52;
    }

    // uniform in [lo, hi)
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // standard normal via Box-Muller (deterministic, two draws per call)
    double normal() {
        const double u1 = uniform_open();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Derives an independent stream from (seed, key...) without advancing this
    // generator. Used for per-scene / per-epoch streams so that any unit of
    // work is reproducible in isolation.
    static uint64_t derive(uint64_t seed, uint64_t key) {
        Rng r(seed ^ (0x632be59bd9b4e019ULL * (key + 1)));
        return r.next_u64();
    }

  private:
    uint64_t state_;
};

}  // namespace setdet
