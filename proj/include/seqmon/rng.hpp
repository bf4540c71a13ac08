#ifndef SEQMON_RNG_HPP
#define SEQMON_RNG_HPP

#include <cstdint>
#include <random>

namespace seqmon {

// splitmix64 (Steele/Lea/Vigna); used both as a hash and to expand seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Deterministic per-stream generator: stream n of a given seed is
/// reproducible independently of evaluation order, so replicates and
/// Monte Carlo runs can be farmed out to threads.
inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  const std::uint64_t s = splitmix64(seed ^ splitmix64(stream));
  return std::mt19937_64(s);
}

/// FNV-1a 64-bit content hash, used for input digests in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace seqmon

#endif  // SEQMON_RNG_HPP
