#pragma once

#include <cstdint>
#include <initializer_list>
#include <cmath>
#include <random>
#include <vector>

namespace fluidrecon {

using Rng = std::mt19937_64;

/// Engine seeded from a list of words (base seed, epoch, worker id, ...).
inline Rng make_rng(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> data;
  for (std::uint64_t w : words) {
    data.push_back(static_cast<std::uint32_t>(w));
    data.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq s(data.begin(), data.end());
  return Rng(s);
}

/// Uniform double in [0, 1) built from the top 53 bits; portable across
/// standard libraries, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

/// Standard normal via Box-Muller (one value per call).
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

}  // namespace fluidrecon
