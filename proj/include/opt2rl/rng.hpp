#pragma once

#include <cstdint>
#include <random>

namespace opt2rl {

// Stateless mixer used to derive independent seed streams from one base seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(base ^ splitmix64(a + 0x51ed2701));
  s = splitmix64(s ^ splitmix64(b + 0xa3c59ac2));
  return splitmix64(s ^ splitmix64(c + 0x0b4e0273));
}

// Uniform double in [0,1) with 53 random bits. Avoids the
// implementation-defined draw sequence of std::uniform_real_distribution.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in {0,...,m-1}. Modulo bias is ~m/2^64, irrelevant here.
inline int rand_below(std::mt19937_64& rng, int m) {
  return static_cast<int>(rng() % static_cast<std::uint64_t>(m));
}

}  // namespace opt2rl
