#pragma once

// Seeded shuffling that gives the same permutation on every standard
// library: std::mt19937_64 output is fully specified, the distributions and
// std::shuffle are not.

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace latinav {

using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection; bound > 0.
inline std::uint64_t bounded(Rng& rng, std::uint64_t bound) {
  // 2^64 mod bound: draws below this would over-represent the low residues.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = rng();
    if (r >= threshold) return r % bound;
  }
}

/// Fisher-Yates.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

template <typename T, typename A>
void shuffle(std::vector<T, A>& items, Rng& rng) {
  shuffle(std::span<T>(items), rng);
}

}  // namespace latinav
