#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace dirnet {

using Rng = std::mt19937_64;

// Deterministic sub-seed derivation (splitmix64 step), so that one top-level
// seed fans out to independent per-layer / per-run streams.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

// First k indices of a seeded partial Fisher-Yates shuffle of 0..n-1.
// std::sample is not bit-stable across standard libraries; this is.
inline std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n,
                                               std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace dirnet
