#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace echopipe {

/// Generator seeded from a tuple of 64-bit words. std::seed_seq keeps only 32 bits
/// per entry, so every word is split into its low and high halves first.
inline std::mt19937_64 seeded_rng(std::initializer_list<std::uint64_t> words) {
  std::vector<std::uint32_t> halves;
  halves.reserve(2 * words.size());
  for (std::uint64_t w : words) {
    halves.push_back(static_cast<std::uint32_t>(w));
    halves.push_back(static_cast<std::uint32_t>(w >> 32));
  }
  std::seed_seq seq(halves.begin(), halves.end());
  return std::mt19937_64(seq);
}

}  // namespace echopipe
