#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace rwre {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Seed for stream `stream` of a run seeded with `seed`. Streams with distinct
/// ids are statistically independent and do not depend on scheduling.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) { return Engine(stream_seed(seed, stream)); }

/// Uniform on [0, 1) from the top 53 bits; platform independent, unlike
/// std::uniform_real_distribution.
inline double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double uniform01(Engine& g) { return to_unit(g()); }

/// Index i with probability cumulative[i] - cumulative[i-1]; the last entry
/// absorbs rounding so the result is always a valid index.
inline int pick(std::span<const double> cumulative, double u) {
  const int n = static_cast<int>(cumulative.size());
  for (int i = 0; i + 1 < n; ++i) {
    if (u < cumulative[static_cast<std::size_t>(i)]) return i;
  }
  return n - 1;
}

}  // namespace rwre
