#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace lapgsr {

/// Seeded random source with platform-independent draws.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; the distributions are implemented here because the standard
/// library's distributions are implementation-defined.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : seed_(seed), engine_(seed) {}

  uint64_t seed() const { return seed_; }
  /// Number of raw 64-bit draws taken so far.
  uint64_t counter() const { return counter_; }

  uint64_t next_u64() {
    ++counter_;
    return engine_();
  }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] (inclusive), unbiased.
  int64_t uniform_int(int64_t lo, int64_t hi);
  /// Standard normal via Box-Muller (one draw per call).
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<int64_t> permutation(int64_t n);

  /// Serialized engine state (text), restorable with restore().
  std::string state() const;
  void restore(const std::string& state);

 private:
  uint64_t seed_;
  uint64_t counter_ = 0;
  std::mt19937_64 engine_;
};

}  // namespace lapgsr
