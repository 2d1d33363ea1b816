#pragma once

#include <optional>
#include <span>
#include <string>

#include "ibs/scenarios.hpp"
#include "json.hpp"

namespace ibs {

enum class SpectralMethod { ExactDiagonal, ExactCirculant, DenseEigen, Stochastic };
std::string to_string(SpectralMethod m);

inline constexpr std::size_t kDenseEigenCap = 4096;

struct EigenBounds {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double lambda_dagger = 0.0;  // (lambda_min + lambda_max) / 2
  SpectralMethod method = SpectralMethod::DenseEigen;
};

/// Eigenvalues of A A^H (ascending) when they can be obtained exactly:
/// squared singulars for diagonal A, |DFT(column)|^2 for circulant A, and a
/// dense Hermitian eigensolve when A has at most `dense_cap` rows and columns.
std::optional<RVec> gram_spectrum(const LinearOperator& a, const OperatorStructure& structure,
                                  std::size_t dense_cap = kDenseEigenCap);

/// Extreme eigenvalues of A A^H. Falls back to power iteration (relative
/// tolerance 1e-6) when no exact spectrum is available.
EigenBounds eigen_bounds(const LinearOperator& a, const OperatorStructure& structure,
                         std::size_t dense_cap = kDenseEigenCap);

/// w_k = (1/dim) sum_i lambda_i (lambda_dagger - lambda_i)^k, k = 0..depth.
RVec trace_moments(std::span<const double> eigenvalues, double lambda_dagger, std::size_t depth, std::size_t dim);

struct StochasticOptions {
  std::size_t probes = 64;
  std::uint64_t seed = 0x1b5d3a9cULL;
};

/// Hutchinson estimate of b_k = (1/dim) tr(A^H Bn^k A) with
/// Bn = I - A A^H / lambda_dagger, using Rademacher probes and the
/// recursion u_k = Bn u_{k-1}, u_0 = A z. Returns b_0..b_depth.
RVec scaled_moments_stochastic(const LinearOperator& a, double lambda_dagger, std::size_t depth, std::size_t dim,
                               const StochasticOptions& opts = {});

/// Spectral quantities consumed by the memory linear estimator.
///
/// `w` holds the raw moments; `b` the same moments divided by
/// lambda_dagger^k, which stay bounded for every k and are what the
/// estimator actually uses.
struct SpectralProfile {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  double lambda_dagger = 0.0;
  double trace = 0.0;  // tr(A A^H)
  std::size_t dim = 0;
  RVec w;
  RVec b;
  SpectralMethod method = SpectralMethod::DenseEigen;
};

SpectralProfile spectral_profile(const LinearOperator& a, const OperatorStructure& structure, std::size_t depth,
                                 std::size_t dim, const StochasticOptions& opts = {},
                                 std::size_t dense_cap = kDenseEigenCap);

nlohmann::ordered_json to_json(const SpectralProfile& profile);

}  // namespace ibs
