#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include "ibs/scenarios.hpp"
#include "ibs/spectral.hpp"

namespace ibs {

// ---------------------------------------------------------------------------
// Non-linear estimator (source domain)

struct DenoiserResult {
  CVec posterior_mean;
  double posterior_var = 0.0;  // per-coordinate average
  double divergence = 0.0;     // average d mean / d r
};

/// MMSE denoiser for s ~ rho CN(0, sigma_s2) + (1 - rho) delta_0 observed as
/// r = s + CN(0, v). Throws DomainError if v <= 0.
DenoiserResult denoise_bernoulli_gaussian(std::span<const cplx> r, double v, double rho, double sigma_s2);

/// MMSE denoiser for unit-power QPSK {(+-1 +- j)/sqrt 2} in CN(0, v) noise.
/// Real and imaginary parts decouple: E[s_re | r] = tanh(sqrt2 r_re / v) / sqrt2.
DenoiserResult denoise_qpsk(std::span<const cplx> r, double v);

DenoiserResult denoise(const SourcePrior& prior, std::span<const cplx> r, double v);

struct NleOutput {
  CVec s_next;
  double v_phi = 0.0;
  bool stalled = false;  // posterior_var >= v_in: input passed through
};

/// Orthogonalized (extrinsic) NLE output:
///   s_next = (mean - p r) / (1 - p),  p = posterior_var / v_in,
///   v_phi  = (1/posterior_var - 1/v_in)^{-1}.
NleOutput nle_orthogonalize(const DenoiserResult& den, std::span<const cplx> r, double v_in);

// ---------------------------------------------------------------------------
// Damping

struct DampingWeights {
  std::vector<double> zeta;
  double predicted_var = 0.0;  // zeta^T V zeta
  bool fallback = false;       // V not PSD: last candidate only
};

/// zeta = V^{-1} 1 / (1^T V^{-1} 1) on V + eps I, eps = 1e-8 tr(V) / W.
/// If the regularized solution does not beat min_i V_ii the best single
/// candidate is returned instead, so predicted_var <= min diag(V) always.
DampingWeights damping_weights(const Eigen::MatrixXd& v);

struct DampingResult {
  DampingWeights weights;
  CVec x;
};

DampingResult damping_update(std::span<const CVec> candidates, const Eigen::MatrixXd& v);

/// V_ij = (Re<y - A c_i, y - A c_j> - M sigma2) / trace_aah, symmetrized,
/// diagonal floored at `floor`, projected to PSD by eigenvalue clipping.
Eigen::MatrixXd estimate_cross_covariance(const LinearOperator& a, std::span<const cplx> y,
                                          std::span<const CVec> candidates, double sigma2, double trace_aah,
                                          double floor = 1e-13);

/// Same estimate from precomputed residuals y - A c_i.
Eigen::MatrixXd covariance_from_residuals(std::span<const CVec> residuals, double sigma2, double trace_aah,
                                          double floor = 1e-13);

// ---------------------------------------------------------------------------
// Memory linear estimator

enum class ThetaSchedule {
  InverseLambdaDagger,  // theta_t = 1 / lambda_dagger
  Regularized,          // theta_t = 1 / (lambda_dagger + sigma2 / v_t)
  Custom,
};
enum class XiSchedule {
  Unit,     // xi_t = 1
  Optimal,  // xi_t minimizing the predicted MLE output variance
  Custom,
};

std::string to_string(ThetaSchedule s);
std::string to_string(XiSchedule s);
ThetaSchedule parse_theta_schedule(const std::string& s);
XiSchedule parse_xi_schedule(const std::string& s);

struct MampConfig {
  std::size_t max_iters = 60;
  std::size_t damping_window = 3;
  ThetaSchedule theta = ThetaSchedule::Regularized;
  XiSchedule xi = XiSchedule::Optimal;
  RVec theta_values;  // Custom: theta_t * lambda_dagger, one per iteration
  RVec xi_values;     // Custom: xi_t, one per iteration
  double variance_floor = 1e-13;
  double stop_tolerance = 1e-12;
  std::size_t stall_patience = 3;     // 0 disables the mse-based stop
  double stall_improvement = 0.01;    // relative mse improvement that resets patience

  void validate() const;
};

/// Split of the source coordinates into `groups` contiguous equal segments
/// such that segment g only reaches observation rows with row_group == g
/// (A diagonal, Xi block-sparse). Orthogonalization, variance tracking and
/// damping then run per segment. groups == 1 is the plain global estimator.
struct BlockPartition {
  std::size_t groups = 1;
  std::vector<std::uint32_t> row_group;  // one entry per observation row; empty when groups == 1
  RVec row_eigenvalues;                  // diag(AA^H); required when groups > 1

  void validate(std::size_t rows, std::size_t source_dim) const;
};

/// Partition for y = diag(alpha) Xi s with Xi built from `row_blocks`
/// (see ibs_row_blocks).
BlockPartition diagonal_block_partition(std::span<const double> singulars, std::vector<std::uint32_t> row_blocks);

/// Inputs shared by every MLE step. `xi` maps the source domain into the
/// domain A acts on.
struct MleContext {
  const LinearOperator& a;
  const LinearOperator& xi;
  std::span<const cplx> y;
  double noise_var = 0.0;
  double variance_floor = 1e-13;
};

/// Per-segment statistics of the memory linear estimator.
///
/// `vartheta[i]` is the cumulative weight of residual i in the memory
/// vector, stored as xi_i prod_{j>i} (theta_j lambda_dagger); together with
/// the scaled moments b_k = (1/D) sum lambda (1 - lambda/lambda_dagger)^k this
/// avoids lambda_dagger^k growth.
struct MleGroup {
  std::size_t rows = 0;  // observation rows
  std::size_t dim = 0;   // source coordinates
  double lambda_dagger = 0.0;
  double trace = 0.0;    // sum of the eigenvalues of AA^H on these rows
  RVec b;
  RVec vartheta;
  Eigen::MatrixXd residual_gram;  // Re<res_i, res_j> restricted to the rows
  Eigen::MatrixXd v;              // error cross-covariance of the estimates
  double v_in = 0.0;
  double v_out = 0.0;
};

struct MampState {
  std::size_t t = 0;            // completed MLE steps
  std::vector<CVec> estimates;  // x_1..x_t in the source domain
  std::vector<CVec> residuals;  // y - A Xi x_i
  CVec memory;                  // r-hat_t
  std::vector<MleGroup> groups;
  std::vector<std::uint32_t> row_group;  // empty for a single group
  RVec row_lambda_dagger;                // lambda_dagger of each row's group
  SpectralProfile spectral;              // global profile
};

/// Fresh state with x_1 = 0. `spectral.dim` must be the source dimension and
/// `spectral.b` must hold at least 2 * max_iters + 2 moments.
MampState mamp_init(const MleContext& ctx, SpectralProfile spectral, const BlockPartition& partition = {});

/// Appends an estimate and its residual; extends every group's V.
void mamp_push(MampState& state, const MleContext& ctx, CVec estimate, CVec residual);

struct MleOutput {
  CVec r;          // source-domain MLE output
  RVec v_gamma;    // predicted error variance per group
  RVec epsilon;
  RVec theta;      // scaled, theta_t * lambda_dagger
  RVec xi;

  double mean_v_gamma() const;
};

/// One memory-linear-estimator step over all stored estimates, per group:
///   r-hat_t = theta_t Bn r-hat_{t-1} + xi_t (y - A Xi x_t),  Bn = I - AA^H / lambda_dagger
///   r_t = (Xi^H A^H r-hat_t + sum_i p_{t,i} x_i) / eps_t,  p_{t,i} = vartheta_{t,i} b_{t-i},
///   eps_t = sum_i p_{t,i}
/// so the signal passes with gain exactly one. v_gamma is the predicted
/// per-coordinate error variance of r_t. Empty `xi` selects the minimizing
/// xi_t. Throws DegenerateError when |eps_t| < 1e-12.
MleOutput mle_step(MampState& state, const MleContext& ctx, std::span<const double> theta_scaled,
                   std::span<const double> xi = {});
MleOutput mle_step(MampState& state, const MleContext& ctx, double theta_scaled, std::optional<double> xi);

// ---------------------------------------------------------------------------
// Full estimators

enum IterationFlag : unsigned {
  kFlagStall = 1u << 0,             // NLE had no information to add
  kFlagDampingFallback = 1u << 1,
  kFlagVarianceFloor = 1u << 2,     // v_gamma clipped at the floor
  kFlagConverged = 1u << 3,         // v_phi below stop tolerance
  kFlagAborted = 1u << 4,           // degenerate normalization
};

struct IterationRecord {
  std::size_t t = 0;
  double mse = 0.0;
  double mse_db = 0.0;
  double v_gamma = 0.0;
  double v_phi = 0.0;
  unsigned flags = 0;
};

struct Trajectory {
  std::vector<IterationRecord> records;
  CVec estimate;  // posterior mean of the last iteration
  std::string abort_reason;

  double final_mse() const { return records.empty() ? 0.0 : records.back().mse; }
};

/// Cross-domain memory AMP: MLE in the transform domain, Xi^H back to the
/// source domain, orthogonalized MMSE NLE, Xi forward, damping over the last
/// `damping_window` estimates. For wide Xi the inverse transform is Xi^H
/// (zero-filled rows); the memory terms are carried in the source domain so
/// the NLE input stays an unbiased observation of s.
/// `spectral` may carry a precomputed global profile of A (at least
/// 2 * max_iters + 2 moments); it is computed when null.
Trajectory run_cd_mamp(const SystemInstance& inst, const LinearOperator& xi, const SourcePrior& prior,
                       const MampConfig& cfg, const BlockPartition& partition = {},
                       const SpectralProfile* spectral = nullptr);
Trajectory run_cd_mamp(const SystemInstance& inst, const SourcePrior& prior, const MampConfig& cfg);

/// Cross-domain OAMP with the exact LMMSE linear stage
///   r = x + Xi^H v A^H (v AA^H + sigma2 I)^{-1} (y - A Xi x) / eps,
///   eps = (1/N) sum_i v lambda_i / (v lambda_i + sigma2).
/// Requires an exact spectrum (diagonal, circulant, or dense below the cap).
/// With a partition, eps and v are tracked per group.
Trajectory run_cd_oamp(const SystemInstance& inst, const LinearOperator& xi, const SourcePrior& prior,
                       const MampConfig& cfg, const BlockPartition& partition = {});
Trajectory run_cd_oamp(const SystemInstance& inst, const SourcePrior& prior, const MampConfig& cfg);

/// Closed-form LMMSE estimate Xi^H sigma_s2 A^H (sigma_s2 AA^H + sigma2 I)^{-1} y
/// for a zero-mean Gaussian source of variance sigma_s2.
CVec lmmse_estimate(const SystemInstance& inst, double sigma_s2);

/// Expected LMMSE mse for diagonal A: (1/N)[sum_i s2 sig2/(s2 a_i^2 + sig2) + (N-M) s2].
double lmmse_mse_diagonal(std::span<const double> singulars, std::size_t n, double sigma_s2, double sigma2);

/// CSV columns: trial_seed,t,mse,mse_db,v_gamma,v_phi,flags
void write_trajectory_csv_header(std::ostream& os);
void write_trajectory_csv(std::ostream& os, std::uint64_t trial_seed, const Trajectory& traj);

}  // namespace ibs
