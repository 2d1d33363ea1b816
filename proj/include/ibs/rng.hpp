#pragma once

#include <cstdint>
#include <string_view>

#include "ibs/types.hpp"

namespace ibs {

/// SplitMix64 (Steele, Lea, Flood 2014). Used to expand a 64-bit seed into
/// generator state and to derive independent stream seeds.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

/// xoshiro256** 1.0 (Blackman, Vigna 2018), state seeded by SplitMix64.
///
/// Every draw is produced from integer arithmetic only, except the Gaussian
/// draws which go through Box-Muller (std::log/std::sqrt/std::cos). Integer
/// outputs, uniform doubles and permutations are therefore bit-identical on
/// every platform; Gaussian draws agree to libm rounding.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed);

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform in {0, ..., bound-1}; Lemire's multiply-shift with rejection.
  std::uint64_t uniform_index(std::uint64_t bound);
  /// Standard normal via Box-Muller; the second variate is cached.
  double normal();
  /// Circular complex Gaussian with E|z|^2 = variance.
  cplx complex_normal(double variance = 1.0);

 private:
  std::uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Stream seed for (master, tag, index). Stable across releases: FNV-1a of
/// the tag is mixed with the master seed and the index through SplitMix64.
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag, std::uint64_t index = 0);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace ibs
