#pragma once

#include <cmath>
#include <cstdint>

#include "mfgda/torus.hpp"

namespace mfgda {

/// Counter-based random stream: every draw is a pure function of
/// (seed, stream, step, slot), so particle updates can be evaluated in any
/// order, or in parallel, and still reproduce bitwise. The mixer is the
/// splitmix64 finalizer applied to the chained key words.
struct CounterRng {
  std::uint64_t seed = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t raw(std::uint64_t stream, std::uint64_t step, std::uint64_t slot) const {
    std::uint64_t h = mix(seed ^ 0x6d9f0e5a3c1b7284ULL);
    h = mix(h ^ stream);
    h = mix(h ^ step);
    h = mix(h ^ slot);
    return h;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01(std::uint64_t stream, std::uint64_t step, std::uint64_t slot) const {
    return static_cast<double>(raw(stream, step, slot) >> 11) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller on slots (2*slot, 2*slot+1).
  double gaussian(std::uint64_t stream, std::uint64_t step, std::uint64_t slot) const {
    const double u1 = 1.0 - uniform01(stream, step, 2 * slot);      // (0, 1]
    const double u2 = uniform01(stream, step, 2 * slot + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }
};

}  // namespace mfgda
