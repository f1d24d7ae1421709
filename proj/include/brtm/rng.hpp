#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace brtm {

// All simulation randomness flows through this engine. std::mt19937_64 has a
// standardized output sequence, and the helpers below avoid the
// implementation-defined std::*_distribution types, so a seed reproduces the
// same bits on every conforming toolchain.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Per-stream seed derivation: derive_seed(master, k) for trial k. Trials
// seeded this way produce the same results in any execution order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

// Uniform in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

// Uniform in [lo, hi).
double uniform_closed_open(Rng& rng, double lo, double hi);

// Uniform in (lo, hi]; never returns lo.
double uniform_open_closed(Rng& rng, double lo, double hi);

// Uniform in [lo, hi]. The endpoint has measure zero, so this is [lo, hi)
// in practice.
double uniform_closed(Rng& rng, double lo, double hi);

// Uniform integer in [0, bound), bound > 0, via rejection (no modulo bias).
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

template <class T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace brtm
