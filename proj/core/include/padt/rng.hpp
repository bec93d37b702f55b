#pragma once

#include <cstdint>

namespace padt {

// Deterministic RNG with pinned algorithms. std::uniform_int_distribution and
// friends are implementation-defined, so every draw here is spelled out to
// keep (seed -> stream) identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Unbiased integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n);

  // Uniform double in [0, 1) with 53 random bits.
  double unit();

  // Uniform double in [lo, hi).
  double uniform(double lo, double hi);

  // Integer in [lo, hi] inclusive.
  int64_t range(int64_t lo, int64_t hi);

  // Standard normal via Box-Muller (both values consumed in order).
  double normal();

  // Independent child stream; deterministic function of (seed, stream id).
  Rng fork(uint64_t stream) const;

  static uint64_t mix(uint64_t a, uint64_t b);

 private:
  uint64_t state_;
  uint64_t seed_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace padt
