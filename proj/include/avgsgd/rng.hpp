#pragma once

// Seed derivation. Every random stream in the library is a function of
// (experiment seed, replication index, stream role).

#include <cstdint>
#include <random>

namespace avgsgd {

enum class StreamRole : std::uint64_t {
  problem = 1,
  samples = 2,
  evaluation = 3,
  init = 4,
  split = 5,
  sampler = 6,
  restarts = 7,
  probes = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t replication, StreamRole role) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ replication);
  return splitmix64(h ^ static_cast<std::uint64_t>(role));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t replication, StreamRole role) {
  return Rng(derive_seed(seed, replication, role));
}

}  // namespace avgsgd
