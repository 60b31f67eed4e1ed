#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace ppgemo {

// All randomness flows through an explicitly passed engine. The helpers below
// avoid the standard distributions so that streams are identical across
// standard library implementations.
using Rng = std::mt19937_64;

// splitmix64-style mixing of a base seed with any number of stream tags.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

double uniform(Rng& rng, double lo, double hi);

// Standard normal via Box-Muller (one value per call).
double standard_normal(Rng& rng);

// Unbiased integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

// Fisher-Yates shuffle.
template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace ppgemo
