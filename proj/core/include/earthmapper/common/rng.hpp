// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace emap {

/// Deterministic random stream.
///
/// Bits come from std::mt19937_64, whose output sequence is fixed by the C++
/// standard. All derived distributions are computed here from those bits
/// (the std:: distributions are implementation-defined), so a seed yields the
/// same draws on every conforming platform:
///   uniform()  -> top 53 bits scaled into [0, 1)
///   normal()   -> Box-Muller on two uniforms, no cached spare
///   below(n)   -> rejection sampling on the top bits
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  /// Index drawn from unnormalized non-negative weights.
  std::size_t categorical(std::span<const double> weights);

  /// Stateless stream derivation (splitmix64 finalizer over seed and tag).
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag);

 private:
  std::mt19937_64 engine_;
};

}  // namespace emap
