#include "ibs/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <Eigen/Eigenvalues>

#include "ibs/errors.hpp"
#include "ibs/rng.hpp"
#include "ibs/transform.hpp"

namespace ibs {

std::string to_string(SpectralMethod m) {
  switch (m) {
    case SpectralMethod::ExactDiagonal: return "exact-diagonal";
    case SpectralMethod::ExactCirculant: return "exact-circulant";
    case SpectralMethod::DenseEigen: return "dense-eigen";
    case SpectralMethod::Stochastic: return "stochastic";
  }
  return "?";
}

namespace {

SpectralMethod exact_method(const OperatorStructure& s) {
  if (std::holds_alternative<DiagonalStructure>(s)) return SpectralMethod::ExactDiagonal;
  if (std::holds_alternative<CirculantStructure>(s)) return SpectralMethod::ExactCirculant;
  return SpectralMethod::DenseEigen;
}

CVec gram_apply(const LinearOperator& a, const CVec& v) { return a.apply(a.apply_adjoint(v)); }

double rayleigh_power(const LinearOperator& a, double shift, std::uint64_t seed) {
  // Largest eigenvalue of (shift I - A A^H) if shift > 0, else of A A^H.
  Xoshiro256 rng(seed);
  CVec v(a.rows());
  for (auto& z : v) z = rng.complex_normal();
  double estimate = 0.0;
  for (int it = 0; it < 20000; ++it) {
    const double nv = std::sqrt(squared_norm(v));
    for (auto& z : v) z /= nv;
    CVec g = gram_apply(a, v);
    if (shift > 0.0) {
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = shift * v[i] - g[i];
    }
    const double next = inner(v, g).real();
    v = std::move(g);
    if (it > 10 && std::abs(next - estimate) <= 1e-9 * std::max(1.0, std::abs(next))) return next;
    estimate = next;
  }
  return estimate;
}

}  // namespace

std::optional<RVec> gram_spectrum(const LinearOperator& a, const OperatorStructure& structure,
                                  std::size_t dense_cap) {
  RVec eig;
  if (const auto* d = std::get_if<DiagonalStructure>(&structure)) {
    for (double s : d->singulars) eig.push_back(s * s);
  } else if (const auto* c = std::get_if<CirculantStructure>(&structure)) {
    CVec spec = fft_forward(c->column);
    const double n = static_cast<double>(spec.size());
    for (const auto& z : spec) eig.push_back(std::norm(z) * n);  // undo unitary scale
  } else {
    if (a.rows() > dense_cap || a.cols() > dense_cap) return std::nullopt;
    const Eigen::MatrixXcd dense = materialize_dense(a, dense_cap);
    const Eigen::MatrixXcd gram = dense * dense.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(gram, Eigen::EigenvaluesOnly);
    for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) eig.push_back(std::max(0.0, solver.eigenvalues()[i]));
  }
  std::sort(eig.begin(), eig.end());
  return eig;
}

EigenBounds eigen_bounds(const LinearOperator& a, const OperatorStructure& structure, std::size_t dense_cap) {
  if (auto eig = gram_spectrum(a, structure, dense_cap)) {
    const double lo = eig->front();
    const double hi = eig->back();
    return {lo, hi, 0.5 * (lo + hi), exact_method(structure)};
  }
  const double hi = rayleigh_power(a, 0.0, 0x9e3779b9ULL);
  const double shifted = rayleigh_power(a, hi, 0x7f4a7c15ULL);
  const double lo = std::max(0.0, hi - shifted);
  return {lo, hi, 0.5 * (lo + hi), SpectralMethod::Stochastic};
}

RVec trace_moments(std::span<const double> eigenvalues, double lambda_dagger, std::size_t depth, std::size_t dim) {
  if (dim == 0) throw SizeError("trace_moments: dim must be positive");
  RVec w(depth + 1, 0.0);
  for (double lam : eigenvalues) {
    double term = lam;
    for (std::size_t k = 0; k <= depth; ++k) {
      w[k] += term;
      term *= (lambda_dagger - lam);
    }
  }
  for (auto& x : w) x /= static_cast<double>(dim);
  return w;
}

RVec scaled_moments_stochastic(const LinearOperator& a, double lambda_dagger, std::size_t depth, std::size_t dim,
                               const StochasticOptions& opts) {
  if (dim == 0 || opts.probes == 0) throw SizeError("stochastic moments: dim and probes must be positive");
  if (!(lambda_dagger > 0.0)) throw DomainError("stochastic moments: lambda_dagger must be positive");
  RVec b(depth + 1, 0.0);
  Xoshiro256 rng(opts.seed);
  CVec z(a.cols());
  for (std::size_t probe = 0; probe < opts.probes; ++probe) {
    for (auto& zi : z) zi = (rng.next_u64() >> 63) ? cplx{-1.0, 0.0} : cplx{1.0, 0.0};
    const CVec u0 = a.apply(z);
    CVec u = u0;
    for (std::size_t k = 0; k <= depth; ++k) {
      b[k] += inner(u0, u).real();
      if (k == depth) break;
      const CVec g = gram_apply(a, u);
      for (std::size_t i = 0; i < u.size(); ++i) u[i] -= g[i] / lambda_dagger;
    }
  }
  for (auto& x : b) x /= static_cast<double>(opts.probes) * static_cast<double>(dim);
  return b;
}

SpectralProfile spectral_profile(const LinearOperator& a, const OperatorStructure& structure, std::size_t depth,
                                 std::size_t dim, const StochasticOptions& opts, std::size_t dense_cap) {
  SpectralProfile p;
  p.dim = dim;
  if (auto eig = gram_spectrum(a, structure, dense_cap)) {
    p.lambda_min = eig->front();
    p.lambda_max = eig->back();
    p.lambda_dagger = 0.5 * (p.lambda_min + p.lambda_max);
    p.method = exact_method(structure);
    p.w = trace_moments(*eig, p.lambda_dagger, depth, dim);
    // Scaled moments directly from the spectrum: no overflow at large k.
    p.b.assign(depth + 1, 0.0);
    for (double lam : *eig) {
      double term = lam;
      const double ratio = 1.0 - lam / p.lambda_dagger;
      for (std::size_t k = 0; k <= depth; ++k) {
        p.b[k] += term;
        term *= ratio;
      }
    }
    for (auto& x : p.b) x /= static_cast<double>(dim);
    p.trace = 0.0;
    for (double lam : *eig) p.trace += lam;
  } else {
    const EigenBounds bounds = eigen_bounds(a, structure, dense_cap);
    p.lambda_min = bounds.lambda_min;
    p.lambda_max = bounds.lambda_max;
    p.lambda_dagger = bounds.lambda_dagger;
    p.method = SpectralMethod::Stochastic;
    p.b = scaled_moments_stochastic(a, p.lambda_dagger, depth, dim, opts);
    p.w.resize(depth + 1);
    for (std::size_t k = 0; k <= depth; ++k) p.w[k] = p.b[k] * std::pow(p.lambda_dagger, static_cast<double>(k));
    p.trace = p.b[0] * static_cast<double>(dim);
  }
  return p;
}

nlohmann::ordered_json to_json(const SpectralProfile& profile) {
  return nlohmann::ordered_json{{"schema_version", 1},
                                {"method", to_string(profile.method)},
                                {"dim", profile.dim},
                                {"lambda_min", profile.lambda_min},
                                {"lambda_max", profile.lambda_max},
                                {"lambda_dagger", profile.lambda_dagger},
                                {"trace", profile.trace},
                                {"w", profile.w},
                                {"b", profile.b}};
}

}  // namespace ibs
