#pragma once

// Seeded random numbers with platform-stable output.
//
// The engine is std::mt19937_64, whose output sequence the C++ standard fixes
// exactly. The standard distributions are not portable, so the transforms
// below are spelled out: uniform from the top 53 bits, normal by the
// Marsaglia polar method (no cached second variate), exponential by
// inversion. Independent streams are keyed by splitmix64 over a seed path.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace ehwf {

/// One splitmix64 step; advances `state`.
std::uint64_t splitmix64(std::uint64_t& state);

/// Deterministic seed for the stream addressed by `path` under `base`.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> path);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal.
  double normal();
  /// Exponential with the given rate.
  double exponential(double rate = 1.0);
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ehwf
