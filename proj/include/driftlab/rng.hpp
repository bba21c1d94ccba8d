#pragma once

#include <cmath>
#include <cstdint>

#include "driftlab/common.hpp"

namespace driftlab {

/// Counter-based random stream.
///
/// Every draw is a pure function of (seed, path, step, draw index), so path i
/// is independent of the total path count and of the parallel schedule, and
/// any batch can be replayed bit-exactly from its spec.
class CounterRng {
public:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static std::uint64_t key(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                             std::uint64_t draw) {
        std::uint64_t h = mix(seed ^ 0x8000000000000001ull);
        h = mix(h ^ path);
        h = mix(h ^ (step + 0x51ED2701FFA1C8B3ull));
        h = mix(h ^ (draw + 0xD6E8FEB86659FD93ull));
        return h;
    }

    /// Uniform in (0,1); never exactly 0 or 1.
    static double uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                          std::uint64_t draw) {
        return (static_cast<double>(key(seed, path, step, draw) >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard Gaussian via Box-Muller (one sample per pair of uniforms).
    static double gaussian(std::uint64_t seed, std::uint64_t path, std::uint64_t step,
                           std::uint64_t draw) {
        const double u1 = uniform(seed, path, step, 2 * draw);
        const double u2 = uniform(seed, path, step, 2 * draw + 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }
};

}  // namespace driftlab
