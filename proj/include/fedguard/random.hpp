#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>

namespace fedguard {

using Complex = std::complex<double>;

/// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0);

/// Portable seeded random source. The engine output sequence of
/// std::mt19937_64 is fixed by the standard; every distribution on top of it
/// is implemented here so results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, bound) by rejection sampling. bound must be > 0.
  std::size_t uniform_index(std::size_t bound);

  /// Circularly-symmetric complex Gaussian CN(0, variance) via Box-Muller,
  /// variance split equally over I and Q.
  Complex complex_normal(double variance = 1.0);

 private:
  std::mt19937_64 engine_;
};

}  // namespace fedguard
