#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace psgen::random {

/// Engine used for every stream; its output sequence is fixed by the standard.
using Engine = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Standard normal via Box-Muller (one value per call, no cached state).
inline double normal(Engine& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Exponential with the given mean.
inline double exponential(Engine& rng, double mean) {
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return -mean * std::log(u);
}

/// Integer in [0, n) by rejection, so every value is equally likely.
inline std::uint64_t below(Engine& rng, std::uint64_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do v = rng();
  while (v >= limit);
  return v % n;
}

/// SplitMix64 finalizer; derives independent seeds from (seed, stream, block).
inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t block = 0) {
  return mix(mix(mix(seed) ^ stream) ^ block);
}

}  // namespace psgen::random
