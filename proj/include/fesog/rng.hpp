#pragma once

#include <cstdint>
#include <random>

namespace fesog {

using Engine = std::mt19937_64;

/// Named sub-streams derived from the master seed.
///
/// Every random decision in a run draws from exactly one of these. The seed of
/// a stream is
///
///   mix(mix(mix(mix(master) ^ tag) ^ a) ^ b)
///
/// where mix is the SplitMix64 finalizer and (a, b) are stream coordinates:
/// (round, client) for kClient, (round, 0) for kClientSampling and (0, 0)
/// otherwise. The resulting 64-bit value seeds a std::mt19937_64.
enum class Stream : std::uint64_t {
  kSplit = 1,
  kInit = 2,
  kClientSampling = 3,
  kClient = 4,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                                    std::uint64_t b = 0) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ a);
  return splitmix64(h ^ b);
}

inline Engine make_engine(std::uint64_t master, Stream stream, std::uint64_t a = 0,
                          std::uint64_t b = 0) {
  return Engine(derive_seed(master, stream, a, b));
}

}  // namespace fesog
