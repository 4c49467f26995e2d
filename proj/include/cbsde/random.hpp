#ifndef CBSDE_RANDOM_HPP
#define CBSDE_RANDOM_HPP

#include <cstdint>
#include <random>

namespace cbsde {

/**
 * Deterministic uniform generator.  Doubles are produced from the raw
 * mt19937_64 stream (53-bit mantissa fill), so a given seed yields the
 * same sequence on every platform.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace cbsde

#endif  // CBSDE_RANDOM_HPP
