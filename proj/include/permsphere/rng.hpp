#pragma once

#include <cstdint>
#include <random>

namespace permsphere {

/// splitmix64 step; used to derive well-separated seeds from user input.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Mixes a base seed with up to two stream indices into one 64-bit seed.
/// Independent (cell, repeat) pairs get statistically independent streams,
/// and the mapping is a pure function of its inputs.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t a = 0,
                              std::uint64_t b = 0) {
  std::uint64_t s = base;
  std::uint64_t h = splitmix64(s);
  s ^= a * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  h ^= splitmix64(s);
  s ^= b * 0xda942042e4dd58b5ULL + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64(s);
  return h;
}

inline std::mt19937_64 make_stream(std::uint64_t base, std::uint64_t a = 0,
                                   std::uint64_t b = 0) {
  return std::mt19937_64{mix_seed(base, a, b)};
}

}  // namespace permsphere
