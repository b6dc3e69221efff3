#pragma once

#include <cstdint>
#include <random>

namespace tinytarget {

// std::mt19937_64 is bit-reproducible everywhere, but the standard
// <random> distributions are implementation-defined. Seeded outputs are part
// of this library's contract, so values are mapped from raw engine bits here.

// Uniform double in [0, 1).
inline double uniform_unit(std::mt19937_64 &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform double in [lo, hi).
inline double uniform_real(std::mt19937_64 &rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [lo, hi], both ends inclusive.
inline int uniform_int(std::mt19937_64 &rng, int lo, int hi) {
  return lo + static_cast<int>(uniform_unit(rng) * (hi - lo + 1));
}

}  // namespace tinytarget
