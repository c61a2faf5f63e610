#ifndef DVFP_RNG_HPP
#define DVFP_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numbers>

namespace dvfp {

/// Counter-based normal generator.
///
/// Every draw is a pure function of (seed, stream, step, index), so the
/// noise seen by particle i at step k does not depend on evaluation order,
/// thread scheduling, or which ensemble asked for it. Coupled runs rely on
/// this to hand bit-identical noise to both ensembles.
class CounterNormal {
  public:
    constexpr CounterNormal(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        // splitmix64 finalizer
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform on the open interval (0, 1).
    double uniform(std::uint64_t step, std::uint64_t index, std::uint64_t lane = 0) const noexcept {
        std::uint64_t h = mix(key_ ^ mix(step * 0xD1342543DE82EF95ULL + mix(index * 4 + lane)));
        return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal via Box-Muller on two independent lanes.
    double normal(std::uint64_t step, std::uint64_t index) const noexcept {
        const double u1 = uniform(step, index, 0);
        const double u2 = uniform(step, index, 1);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

  private:
    std::uint64_t key_;
};

}  // namespace dvfp

#endif
