#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace phonesense {

using Rng = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent seed for stream `index` under `seed`. Used so that
/// per-tree, per-fold and per-participant generators do not depend on the
/// order in which parallel workers run.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index,
                                       std::uint64_t tag = 0) noexcept {
  return splitmix64(splitmix64(seed ^ splitmix64(tag)) + index);
}

// FNV-1a, stable across platforms and runs (std::hash is not).
constexpr std::uint64_t stable_hash(std::string_view text) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace phonesense
