#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Seeding and normal deviates are pinned down explicitly so that a given
// (seed, stream) pair produces the same byte sequence on every run and on
// every thread count. std::mt19937_64 is fully specified by the standard;
// std::normal_distribution is not, so the Box-Muller transform is spelled
// out here.

namespace magsim::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Engine for an independent stream, derived deterministically from
/// (seed, stream index). Used to give each trajectory its own RNG.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(splitmix64(seed) ^ (stream + 1)));
}

/// Uniform deviate in (0, 1]; never returns 0 so log() below is safe.
inline double uniform01(std::mt19937_64& gen) {
  return (static_cast<double>(gen() >> 11) + 1.0) * 0x1.0p-53;
}

/// Standard normal deviate (Box-Muller, cosine branch only).
inline double normal(std::mt19937_64& gen) {
  const double u = uniform01(gen);
  const double v = uniform01(gen);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
}

}  // namespace magsim::rng
