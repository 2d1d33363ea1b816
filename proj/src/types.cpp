#include "ibs/types.hpp"

#include <algorithm>

namespace ibs {

double squared_norm(const CVec& v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::norm(z);
  return acc;
}

cplx inner(const CVec& a, const CVec& b) {
  cplx acc{0.0, 0.0};
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

}  // namespace ibs
