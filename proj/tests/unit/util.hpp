#pragma once

#include <Eigen/Dense>
#include <bit>
#include <cmath>

#include "ibs/linear_operator.hpp"
#include "ibs/rng.hpp"

namespace testutil {

using ibs::cplx;
using ibs::CVec;

inline CVec random_cvec(std::size_t n, ibs::Xoshiro256& rng) {
  CVec v(n);
  for (auto& x : v) x = {rng.normal(), rng.normal()};
  return v;
}

inline double max_abs_diff(const CVec& a, const CVec& b) {
  double m = a.size() == b.size() ? 0.0 : INFINITY;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline Eigen::VectorXcd to_eigen(const CVec& v) {
  Eigen::VectorXcd e(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) e(static_cast<Eigen::Index>(i)) = v[i];
  return e;
}

inline CVec from_eigen(const Eigen::VectorXcd& e) { return CVec(e.data(), e.data() + e.size()); }

inline Eigen::MatrixXcd dft_matrix(std::size_t n) {
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXcd f(ni, ni);
  for (Eigen::Index k = 0; k < ni; ++k) {
    for (Eigen::Index j = 0; j < ni; ++j) {
      const double ang = -2.0 * ibs::kPi * static_cast<double>((k * j) % ni) / static_cast<double>(n);
      f(k, j) = std::polar(1.0 / std::sqrt(static_cast<double>(n)), ang);
    }
  }
  return f;
}

// Sylvester recursion H_{2n} = [H H; H -H], normalized.
inline Eigen::MatrixXcd hadamard_matrix(std::size_t n) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Ones(1, 1);
  while (static_cast<std::size_t>(h.rows()) < n) {
    const auto k = h.rows();
    Eigen::MatrixXd next(2 * k, 2 * k);
    next << h, h, h, -h;
    h = next;
  }
  return h.cast<cplx>() / std::sqrt(static_cast<double>(n));
}

inline Eigen::MatrixXcd permutation_matrix(std::span<const std::size_t> mapping) {
  const auto n = static_cast<Eigen::Index>(mapping.size());
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) p(i, static_cast<Eigen::Index>(mapping[static_cast<std::size_t>(i)])) = 1.0;
  return p;
}

inline Eigen::MatrixXcd random_matrix(Eigen::Index r, Eigen::Index c, ibs::Xoshiro256& rng) {
  Eigen::MatrixXcd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = {rng.normal(), rng.normal()};
  }
  return m;
}

inline Eigen::MatrixXcd random_unitary(Eigen::Index n, ibs::Xoshiro256& rng) {
  Eigen::HouseholderQR<Eigen::MatrixXcd> qr(random_matrix(n, n, rng));
  return qr.householderQ() * Eigen::MatrixXcd::Identity(n, n);
}

inline double adjoint_mismatch(const ibs::LinearOperator& op, ibs::Xoshiro256& rng) {
  const CVec v = random_cvec(op.cols(), rng);
  const CVec u = random_cvec(op.rows(), rng);
  const cplx lhs = ibs::inner(u, op.apply(v));
  const cplx rhs = ibs::inner(op.apply_adjoint(u), v);
  return std::abs(lhs - rhs) / std::abs(lhs);
}

inline double dense_mismatch(const ibs::LinearOperator& op, const Eigen::MatrixXcd& ref) {
  const Eigen::MatrixXcd d = ibs::materialize_dense(op);
  if (d.rows() != ref.rows() || d.cols() != ref.cols()) return INFINITY;
  return (d - ref).cwiseAbs().maxCoeff();
}

}  // namespace testutil
