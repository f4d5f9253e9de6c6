#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace hlab {

// splitmix64 finalizer; used to derive independent stream seeds from a single
// run seed and a counter (path index, batch index, ...).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t counter) noexcept {
  return splitmix64(seed ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed, std::uint64_t counter = 0) {
  return Engine(stream_seed(seed, counter));
}

// Uniform on [0,1) with 53 random bits.
inline double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Unit-rate exponential.
inline double exponential1(Engine& rng) { return -std::log1p(-uniform01(rng)); }

using NormalDistribution = std::normal_distribution<double>;

}  // namespace hlab
