#ifndef SPINWG_RNG_HPP
#define SPINWG_RNG_HPP

#include <cstdint>

namespace spinwg {

/// splitmix64: deterministic across platforms, unlike the standard library
/// distributions. Good enough for drawing bump parameters and test noise.
struct SplitMix64 {
    std::uint64_t state;

    explicit SplitMix64(std::uint64_t seed) : state(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return (next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// +1 or -1.
    double sign() { return (next() & 1) ? 1.0 : -1.0; }
};

} // namespace spinwg

#endif
