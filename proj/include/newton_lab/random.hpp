#pragma once

// Reproducible random numbers. The engine sequence of std::mt19937_64 is fixed
// by the standard, but the standard distributions are not, so every draw is
// derived here from raw engine output.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "newton_lab/linalg.hpp"

namespace newton_lab {

inline constexpr std::uint64_t default_seed = 20220630;

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of an independent substream identified by (a, b) under `master`.
inline constexpr std::uint64_t substream_seed(std::uint64_t master, std::uint64_t a,
                                              std::uint64_t b = 0) noexcept {
  return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1342543de82ef95ULL));
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t bits() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool coin() { return (engine_() >> 63) != 0; }

  /// Standard normal deviate (Box-Muller, one value per call).
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Uniformly distributed direction on the unit sphere in R^n.
  Vector unit_direction(std::size_t n) {
    Vector w(n);
    double len = 0.0;
    while (len == 0.0) {
      for (std::size_t i = 0; i < n; ++i) w[i] = normal();
      len = norm2(w);
    }
    return w *= 1.0 / len;
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace newton_lab
