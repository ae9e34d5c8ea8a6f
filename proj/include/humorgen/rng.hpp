#pragma once

// Portable seeded randomness. std::uniform_int_distribution and std::shuffle are
// implementation-defined, so sampled topics and evaluation subsets would differ
// between standard libraries; everything here depends only on mt19937_64.

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace humorgen {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Independent stream for a named sub-task (e.g. one topic), so results do not
/// depend on the order in which concurrent work finishes.
inline Rng derive_rng(std::uint64_t seed, std::string_view salt) {
  return Rng(splitmix64(seed ^ fnv1a64(salt)));
}

/// Uniform integer in [0, n). n must be > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
  std::uint64_t draw = rng();
  while (draw >= limit) draw = rng();
  return draw % n;
}

template <class T>
void portable_shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_index(rng, i)]);
  }
}

/// First `n` positions of a Fisher-Yates shuffle: n distinct indices into [0, size).
inline std::vector<std::size_t> sample_indices(std::size_t size, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(size);
  for (std::size_t i = 0; i < size; ++i) idx[i] = i;
  if (n > size) n = size;
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, size - i)]);
  }
  idx.resize(n);
  return idx;
}

template <class T>
std::vector<T> sample_without_replacement(std::span<const T> items, std::size_t n, Rng& rng) {
  std::vector<T> out;
  out.reserve(n);
  for (std::size_t i : sample_indices(items.size(), n, rng)) out.push_back(items[i]);
  return out;
}

}  // namespace humorgen
