#pragma once

#include <cstdint>

namespace depthgen {

/// Counter-based deterministic generator. Each draw hashes (seed, counter)
/// through SplitMix64, so a given seed yields the same stream on every
/// platform regardless of call history elsewhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(0) {}

  std::uint64_t next_u64();

  /// Uniform in [0,1), 53-bit resolution.
  double uniform01();
  double uniform(double a, double b);

  /// Standard normal via Box-Muller; consumes two draws per value.
  double normal(double mu, double sigma);

  /// Normal(0, sigma) resampled until |x| <= 2*sigma.
  double truncated_normal(double sigma);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace depthgen
