#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file rng.hpp
 * @brief Deterministic random streams with cheap substream derivation.
 *
 * Every stochastic component draws from an Rng seeded through
 * substream_seed(), so the stream consumed by one unit of work (a query's
 * rollouts, a task's evaluation samples) is a pure function of the run seed
 * and the unit's indices. Work order and thread count can never perturb
 * sampling.
 *
 * Uniform doubles use the 53-bit ldexp construction, which is identical
 * across platforms for a given mt19937_64 state (std::uniform_real_distribution
 * is not portable across standard libraries).
 */

#include <cstdint>
#include <random>

namespace forklab::rng {

/// splitmix64 finalizer; full-period bijective mixer over u64.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/**
 * Derive an independent substream seed from a root seed and up to three
 * indices. Distinct index tuples give (with overwhelming probability)
 * uncorrelated mt19937_64 initializations.
 */
inline std::uint64_t substream_seed(std::uint64_t root, std::uint64_t a,
                                    std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = splitmix64(root ^ 0x6c62272e07bb0142ull);
  s = splitmix64(s ^ splitmix64(a));
  s = splitmix64(s ^ splitmix64(b));
  s = splitmix64(s ^ splitmix64(c));
  return s;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased for any n.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
  }

  std::uint64_t bits() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace forklab::rng
