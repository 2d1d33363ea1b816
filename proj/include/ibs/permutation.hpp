#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ibs/types.hpp"

namespace ibs {

/// Bijection on {0, ..., size-1}. Applying it to a vector gathers:
/// out[i] = in[mapping[i]], i.e. row i of the permutation matrix is
/// e_{mapping[i]}^T.
class Permutation {
 public:
  static Permutation identity(std::size_t size);
  /// Throws ConfigError unless `mapping` is a bijection.
  static Permutation from_mapping(std::vector<std::size_t> mapping, std::uint64_t seed = 0);

  std::size_t size() const { return mapping_.size(); }
  std::uint64_t seed() const { return seed_; }
  std::span<const std::size_t> mapping() const { return mapping_; }
  std::size_t operator[](std::size_t i) const { return mapping_[i]; }

  CVec apply(std::span<const cplx> v) const;
  CVec apply_inverse(std::span<const cplx> v) const;
  Permutation inverse() const;
  bool is_identity() const;

 private:
  Permutation(std::vector<std::size_t> mapping, std::uint64_t seed)
      : mapping_(std::move(mapping)), seed_(seed) {}

  std::vector<std::size_t> mapping_;
  std::uint64_t seed_ = 0;

  friend Permutation make_permutation(std::size_t size, std::uint64_t seed);
};

/// Uniform random permutation: Fisher-Yates (Durstenfeld, descending index)
/// driven by Xoshiro256 seeded with `seed`. Integer-only, so the mapping is
/// reproducible bit-exactly from (size, seed) on any platform.
Permutation make_permutation(std::size_t size, std::uint64_t seed);

}  // namespace ibs
