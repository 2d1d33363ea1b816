#include "ibs/permutation.hpp"

#include <numeric>
#include <string>

#include "ibs/errors.hpp"
#include "ibs/rng.hpp"

namespace ibs {

Permutation Permutation::identity(std::size_t size) {
  if (size == 0) throw SizeError("permutation size must be positive");
  std::vector<std::size_t> map(size);
  std::iota(map.begin(), map.end(), std::size_t{0});
  return Permutation(std::move(map), 0);
}

Permutation Permutation::from_mapping(std::vector<std::size_t> mapping, std::uint64_t seed) {
  if (mapping.empty()) throw SizeError("permutation size must be positive");
  std::vector<bool> seen(mapping.size(), false);
  for (auto idx : mapping) {
    if (idx >= mapping.size() || seen[idx]) throw ConfigError("mapping is not a bijection");
    seen[idx] = true;
  }
  return Permutation(std::move(mapping), seed);
}

Permutation make_permutation(std::size_t size, std::uint64_t seed) {
  if (size == 0) throw SizeError("permutation size must be positive");
  std::vector<std::size_t> map(size);
  std::iota(map.begin(), map.end(), std::size_t{0});
  Xoshiro256 rng(seed);
  for (std::size_t i = size - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_index(i + 1));
    std::swap(map[i], map[j]);
  }
  return Permutation(std::move(map), seed);
}

CVec Permutation::apply(std::span<const cplx> v) const {
  if (v.size() != size()) throw SizeError("permutation: length mismatch");
  CVec out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = v[mapping_[i]];
  return out;
}

CVec Permutation::apply_inverse(std::span<const cplx> v) const {
  if (v.size() != size()) throw SizeError("permutation: length mismatch");
  CVec out(size());
  for (std::size_t i = 0; i < size(); ++i) out[mapping_[i]] = v[i];
  return out;
}

Permutation Permutation::inverse() const {
  std::vector<std::size_t> inv(size());
  for (std::size_t i = 0; i < size(); ++i) inv[mapping_[i]] = i;
  return Permutation(std::move(inv), seed_);
}

bool Permutation::is_identity() const {
  for (std::size_t i = 0; i < size(); ++i) {
    if (mapping_[i] != i) return false;
  }
  return true;
}

}  // namespace ibs
