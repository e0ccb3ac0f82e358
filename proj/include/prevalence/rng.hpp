#pragma once

#include <cstdint>
#include <random>

namespace prevalence {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based stream derivation: the seed for task (a, b, c) of a run is a
// pure function of the run seed, so results never depend on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(base);
  s = splitmix64(s ^ a);
  s = splitmix64(s ^ (b + 0x632be59bd9b4e019ULL));
  return splitmix64(s ^ (c + 0x8cb92ba72f3d8dd7ULL));
}

}  // namespace prevalence
