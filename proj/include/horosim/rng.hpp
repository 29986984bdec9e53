#pragma once

#include <cstdint>
#include <random>

namespace horosim {

// All randomness flows through std::mt19937_64.  Independent streams are
// derived from one user-facing 64-bit seed by SplitMix64: stream k is seeded
// with splitmix64(seed + k * 0x9e3779b97f4a7c15).  The stream layout used by
// the drivers is documented where the streams are created; reusing a
// (seed, stream) pair reproduces the identical draw sequence within a build.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  return std::mt19937_64(splitmix64(seed + stream * 0x9e3779b97f4a7c15ULL));
}

}  // namespace horosim
