#pragma once
#include <cmath>
#include <cstdint>
#include <random>

namespace mflab {

// Deterministic RNG wrapper. std::normal_distribution is implementation
// defined, so uniform/normal draws are derived from raw mt19937_64 output to
// keep traces reproducible across standard libraries.
struct Rng {
  std::mt19937_64 gen;

  explicit Rng(uint64_t seed) : gen(seed) {}

  uint64_t next() { return gen(); }

  // [0, 1), 53-bit resolution
  double u01() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // inclusive range; modulo bias is irrelevant at our range sizes
  int uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(gen() % span);
  }

  // Box-Muller, uncached so each draw consumes exactly two uniforms
  double normal() {
    double u1 = u01();
    while (u1 <= 0x1.0p-500) u1 = u01();
    double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }
};

}  // namespace mflab
