#include "ibs/estimators.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "ibs/errors.hpp"
#include "ibs/transform.hpp"

namespace ibs {

namespace {

constexpr double kDegenerateEpsilon = 1e-12;

Eigen::MatrixXd project_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  Eigen::VectorXd eig = solver.eigenvalues().cwiseMax(0.0);
  return solver.eigenvectors() * eig.asDiagonal() * solver.eigenvectors().transpose();
}

// Raw residual Gram Re<res_i, res_j> -> per-coordinate error covariance.
Eigen::MatrixXd covariance_from_gram(const Eigen::MatrixXd& gram, std::size_t m, double sigma2, double trace,
                                     double floor) {
  if (!(trace > 0.0)) throw DomainError("covariance estimate: tr(AA^H) must be positive");
  Eigen::MatrixXd v = (gram.array() - static_cast<double>(m) * sigma2) / trace;
  v = 0.5 * (v + v.transpose()).eval();
  for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, i) = std::max(v(i, i), floor);
  v = project_psd(v);
  for (Eigen::Index i = 0; i < v.rows(); ++i) v(i, i) = std::max(v(i, i), floor);
  return v;
}

CVec residual(const MleContext& ctx, const CVec& estimate) {
  CVec r = ctx.a.apply(ctx.xi.apply(estimate));
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = ctx.y[i] - r[i];
  return r;
}

// Exact (v AA^H + sigma2 I)^{-1} solves for the structures with a known spectrum.
class GramSolver {
 public:
  GramSolver(const LinearOperator& a, const OperatorStructure& structure) : structure_(structure) {
    if (const auto* d = std::get_if<DiagonalStructure>(&structure)) {
      for (double s : d->singulars) eig_.push_back(s * s);
    } else if (const auto* c = std::get_if<CirculantStructure>(&structure)) {
      CVec spec = fft_forward(c->column);
      const double n = static_cast<double>(spec.size());
      for (const auto& z : spec) eig_.push_back(std::norm(z) * n);
    } else {
      if (a.rows() > kDenseEigenCap || a.cols() > kDenseEigenCap) {
        throw ConfigError("LMMSE stage needs an exact spectrum; reduce the problem size below " +
                          std::to_string(kDenseEigenCap));
      }
      const Eigen::MatrixXcd dense = materialize_dense(a);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(dense * dense.adjoint());
      basis_ = solver.eigenvectors();
      for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) eig_.push_back(std::max(0.0, solver.eigenvalues()[i]));
    }
  }

  const RVec& eigenvalues() const { return eig_; }

  // (v AA^H + sigma2 I)^{-1} b
  CVec solve(const CVec& b, double v, double sigma2) const {
    CVec out(b.size());
    if (std::holds_alternative<DiagonalStructure>(structure_)) {
      for (std::size_t i = 0; i < b.size(); ++i) out[i] = b[i] / (v * eig_[i] + sigma2);
    } else if (std::holds_alternative<CirculantStructure>(structure_)) {
      out = fft_forward(b);
      for (std::size_t i = 0; i < out.size(); ++i) out[i] /= (v * eig_[i] + sigma2);
      ifft_inplace(out);
    } else {
      Eigen::Map<const Eigen::VectorXcd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
      Eigen::VectorXcd coef = basis_.adjoint() * bv;
      for (Eigen::Index i = 0; i < coef.size(); ++i) coef[i] /= (v * eig_[static_cast<std::size_t>(i)] + sigma2);
      Eigen::Map<Eigen::VectorXcd>(out.data(), static_cast<Eigen::Index>(out.size())) = basis_ * coef;
    }
    return out;
  }

 private:
  const OperatorStructure& structure_;
  RVec eig_;
  Eigen::MatrixXcd basis_;
};

void check_dimensions(const SystemInstance& inst, const LinearOperator& xi) {
  if (xi.rows() != inst.a.cols()) throw ConfigError("estimator: Xi rows do not match A columns");
  if (inst.y.size() != inst.a.rows()) throw ConfigError("estimator: y length does not match A rows");
  if (!inst.s_true.empty() && inst.s_true.size() != xi.cols()) {
    throw ConfigError("estimator: s_true length does not match Xi columns");
  }
}

double db(double x) { return x > 0.0 ? 10.0 * std::log10(x) : -std::numeric_limits<double>::infinity(); }

// Early-stop bookkeeping shared by both estimators.
class StopRule {
 public:
  explicit StopRule(const MampConfig& cfg) : cfg_(cfg) {}
  bool update(double mse, bool have_truth, bool stalled) {
    stall_run_ = stalled ? stall_run_ + 1 : 0;
    if (cfg_.stall_patience == 0) return false;
    if (stall_run_ >= cfg_.stall_patience) return true;
    if (!have_truth) return false;
    if (mse < best_ * (1.0 - cfg_.stall_improvement)) {
      best_ = mse;
      no_progress_ = 0;
    } else {
      ++no_progress_;
    }
    return no_progress_ >= cfg_.stall_patience;
  }

 private:
  const MampConfig& cfg_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t no_progress_ = 0;
  std::size_t stall_run_ = 0;
};

}  // namespace

// ---------------------------------------------------------------------------

DampingWeights damping_weights(const Eigen::MatrixXd& v) {
  const auto w = static_cast<std::size_t>(v.rows());
  if (w == 0 || v.cols() != v.rows()) throw SizeError("damping: V must be square and non-empty");
  DampingWeights out;
  if (w == 1) {
    out.zeta = {1.0};
    out.predicted_var = v(0, 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (v + v.transpose()));
  const double scale = std::max(1e-300, solver.eigenvalues().cwiseAbs().maxCoeff());
  const bool psd = solver.eigenvalues().minCoeff() >= -1e-10 * scale && v.allFinite();
  if (!psd) {
    out.zeta.assign(w, 0.0);
    out.zeta.back() = 1.0;
    out.predicted_var = v(v.rows() - 1, v.cols() - 1);
    out.fallback = true;
    return out;
  }
  const double eps = std::max(1e-8 * v.trace() / static_cast<double>(w), 1e-300);
  Eigen::MatrixXd reg = v + eps * Eigen::MatrixXd::Identity(v.rows(), v.cols());
  Eigen::VectorXd u = reg.ldlt().solve(Eigen::VectorXd::Ones(v.rows()));
  const double total = u.sum();
  Eigen::VectorXd zeta = u / total;
  double predicted = zeta.dot(v * zeta);

  Eigen::Index best = 0;
  const double min_diag = v.diagonal().minCoeff(&best);
  if (!zeta.allFinite() || !std::isfinite(predicted) || predicted > min_diag) {
    zeta.setZero();
    zeta[best] = 1.0;
    predicted = min_diag;
  }
  out.zeta.assign(zeta.data(), zeta.data() + zeta.size());
  out.predicted_var = predicted;
  return out;
}

DampingResult damping_update(std::span<const CVec> candidates, const Eigen::MatrixXd& v) {
  if (candidates.empty()) throw SizeError("damping: no candidates");
  if (static_cast<std::size_t>(v.rows()) != candidates.size()) throw SizeError("damping: V size does not match candidates");
  DampingResult out{damping_weights(v), CVec(candidates.front().size(), cplx{0.0, 0.0})};
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const double z = out.weights.zeta[k];
    if (z == 0.0) continue;
    for (std::size_t i = 0; i < out.x.size(); ++i) out.x[i] += z * candidates[k][i];
  }
  return out;
}

Eigen::MatrixXd covariance_from_residuals(std::span<const CVec> residuals, double sigma2, double trace_aah,
                                          double floor) {
  if (residuals.empty()) throw SizeError("covariance: no residuals");
  const auto k = static_cast<Eigen::Index>(residuals.size());
  Eigen::MatrixXd gram(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i; j < k; ++j) {
      gram(i, j) = gram(j, i) = inner(residuals[static_cast<std::size_t>(i)], residuals[static_cast<std::size_t>(j)]).real();
    }
  }
  return covariance_from_gram(gram, residuals.front().size(), sigma2, trace_aah, floor);
}

Eigen::MatrixXd estimate_cross_covariance(const LinearOperator& a, std::span<const cplx> y,
                                          std::span<const CVec> candidates, double sigma2, double trace_aah,
                                          double floor) {
  if (candidates.empty()) throw SizeError("covariance: no candidates");
  std::vector<CVec> res;
  res.reserve(candidates.size());
  for (const auto& c : candidates) {
    CVec r = a.apply(c);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - r[i];
    res.push_back(std::move(r));
  }
  return covariance_from_residuals(res, sigma2, trace_aah, floor);
}

// ---------------------------------------------------------------------------

std::string to_string(ThetaSchedule s) {
  switch (s) {
    case ThetaSchedule::InverseLambdaDagger: return "inverse-lambda-dagger";
    case ThetaSchedule::Regularized: return "regularized";
    case ThetaSchedule::Custom: return "custom";
  }
  return "?";
}

std::string to_string(XiSchedule s) {
  switch (s) {
    case XiSchedule::Unit: return "unit";
    case XiSchedule::Optimal: return "optimal";
    case XiSchedule::Custom: return "custom";
  }
  return "?";
}

ThetaSchedule parse_theta_schedule(const std::string& s) {
  if (s == "inverse-lambda-dagger") return ThetaSchedule::InverseLambdaDagger;
  if (s == "regularized") return ThetaSchedule::Regularized;
  if (s == "custom") return ThetaSchedule::Custom;
  throw ConfigError("unknown theta schedule '" + s + "'");
}

XiSchedule parse_xi_schedule(const std::string& s) {
  if (s == "unit") return XiSchedule::Unit;
  if (s == "optimal") return XiSchedule::Optimal;
  if (s == "custom") return XiSchedule::Custom;
  throw ConfigError("unknown xi schedule '" + s + "'");
}

void MampConfig::validate() const {
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1");
  if (damping_window < 1) throw ConfigError("damping_window must be >= 1");
  if (!(variance_floor > 0.0)) throw ConfigError("variance_floor must be positive");
  if (theta == ThetaSchedule::Custom && theta_values.empty()) throw ConfigError("custom theta schedule needs values");
  if (xi == XiSchedule::Custom && xi_values.empty()) throw ConfigError("custom xi schedule needs values");
}

void BlockPartition::validate(std::size_t rows, std::size_t source_dim) const {
  if (groups == 0) throw ConfigError("block partition: need at least one group");
  if (groups == 1) return;
  if (source_dim % groups != 0) throw ConfigError("block partition: groups must divide the source dimension");
  if (row_group.size() != rows || row_eigenvalues.size() != rows) {
    throw ConfigError("block partition: row labels and eigenvalues must cover every observation row");
  }
  std::vector<std::size_t> count(groups, 0);
  for (auto g : row_group) {
    if (g >= groups) throw ConfigError("block partition: row label out of range");
    ++count[g];
  }
  for (auto c : count) {
    if (c == 0) throw ConfigError("block partition: every group needs at least one observation row");
  }
}

BlockPartition diagonal_block_partition(std::span<const double> singulars, std::vector<std::uint32_t> row_blocks) {
  if (singulars.size() != row_blocks.size()) throw SizeError("block partition: singulars and row labels differ in length");
  BlockPartition p;
  p.groups = 1;
  for (auto g : row_blocks) p.groups = std::max<std::size_t>(p.groups, std::size_t{g} + 1);
  p.row_eigenvalues.reserve(singulars.size());
  for (double a : singulars) p.row_eigenvalues.push_back(a * a);
  p.row_group = std::move(row_blocks);
  if (p.groups == 1) {
    p.row_group.clear();
    p.row_eigenvalues.clear();
  }
  return p;
}

double MleOutput::mean_v_gamma() const {
  double acc = 0.0;
  for (double v : v_gamma) acc += v;
  return v_gamma.empty() ? 0.0 : acc / static_cast<double>(v_gamma.size());
}

namespace {

// Re<a, b> restricted to the rows of each group.
RVec group_inner(const CVec& a, const CVec& b, const std::vector<std::uint32_t>& row_group, std::size_t groups) {
  RVec out(groups, 0.0);
  if (row_group.empty()) {
    out[0] = inner(a, b).real();
    return out;
  }
  for (std::size_t i = 0; i < a.size(); ++i) {
    out[row_group[i]] += a[i].real() * b[i].real() + a[i].imag() * b[i].imag();
  }
  return out;
}

std::size_t group_of_row(const MampState& state, std::size_t i) { return state.row_group.empty() ? 0 : state.row_group[i]; }

struct GroupStep {
  double xi = 1.0;
  Eigen::MatrixXd g;
  Eigen::VectorXd lagged;
};

// Covariance kernel of the memory terms and the xi minimizing
//   v(xi) = th^T G th / (lagged . th)^2,  th = [theta vartheta_prev, xi].
GroupStep prepare_group(const MleGroup& grp, std::size_t t, double theta_scaled, std::optional<double> xi_fixed,
                        double sigma2) {
  const RVec& b = grp.b;
  const double lam = grp.lambda_dagger;
  const auto n = static_cast<Eigen::Index>(t);
  GroupStep step;
  step.g.resize(n, n);
  step.lagged.resize(n);
  // G_ij = V_ij (lam (b_{a+c} - b_{a+c+1}) - b_a b_c) + sigma2 b_{a+c}, lags a = t-1-i, c = t-1-j.
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto li = static_cast<std::size_t>(n - 1 - i);
    step.lagged[i] = b[li];
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto lj = static_cast<std::size_t>(n - 1 - j);
      const double cov = lam * (b[li + lj] - b[li + lj + 1]) - b[li] * b[lj];
      step.g(i, j) = grp.v(i, j) * cov + sigma2 * b[li + lj];
    }
  }
  if (xi_fixed) {
    step.xi = *xi_fixed;
    return step;
  }
  if (t == 1) return step;

  Eigen::VectorXd base = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) base[i] = theta_scaled * grp.vartheta[static_cast<std::size_t>(i)];
  auto predicted = [&](double xi) {
    Eigen::VectorXd th = base;
    th[n - 1] = xi;
    const double eps = step.lagged.dot(th);
    return std::pair{th.dot(step.g * th) / (eps * eps), eps};
  };
  const Eigen::VectorXd gu = step.g * base;
  const double qa = base.dot(gu);
  const double qb = gu[n - 1];
  const double qc = step.g(n - 1, n - 1);
  const double qd = step.lagged.dot(base);
  const double qf = step.lagged[n - 1];
  const double denom = qc * qd - qb * qf;

  auto [best, eps_unit] = predicted(1.0);
  if (!(std::abs(eps_unit) >= kDegenerateEpsilon) || !std::isfinite(best)) best = std::numeric_limits<double>::infinity();
  if (denom != 0.0) {
    const double cand = (qf * qa - qb * qd) / denom;
    const auto [val, eps] = predicted(cand);
    if (std::isfinite(cand) && std::isfinite(val) && std::abs(eps) >= kDegenerateEpsilon && val < best) step.xi = cand;
  }
  return step;
}

MleGroup make_group(std::size_t rows, std::size_t dim, std::span<const double> eigs, std::size_t depth) {
  MleGroup grp;
  grp.rows = rows;
  grp.dim = dim;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (double lam : eigs) {
    lo = std::min(lo, lam);
    hi = std::max(hi, lam);
    grp.trace += lam;
  }
  grp.lambda_dagger = 0.5 * (lo + hi);
  if (!(grp.lambda_dagger > 0.0)) throw DomainError("mamp_init: a group has no positive eigenvalue");
  grp.b.assign(depth + 1, 0.0);
  for (double lam : eigs) {
    double term = lam;
    const double ratio = 1.0 - lam / grp.lambda_dagger;
    for (std::size_t k = 0; k <= depth; ++k) {
      grp.b[k] += term;
      term *= ratio;
    }
  }
  for (auto& x : grp.b) x /= static_cast<double>(dim);
  return grp;
}

}  // namespace

MampState mamp_init(const MleContext& ctx, SpectralProfile spectral, const BlockPartition& partition) {
  if (ctx.y.size() != ctx.a.rows()) throw SizeError("mamp_init: y length does not match A rows");
  if (ctx.xi.rows() != ctx.a.cols()) throw SizeError("mamp_init: Xi rows do not match A columns");
  if (spectral.dim != ctx.xi.cols()) throw SizeError("mamp_init: spectral dimension must equal the source dimension");
  if (!(spectral.lambda_dagger > 0.0)) throw DomainError("mamp_init: A A^H has no positive eigenvalue");
  partition.validate(ctx.a.rows(), ctx.xi.cols());

  MampState state;
  const std::size_t rows = ctx.a.rows();
  if (partition.groups == 1) {
    MleGroup grp;
    grp.rows = rows;
    grp.dim = spectral.dim;
    grp.lambda_dagger = spectral.lambda_dagger;
    grp.trace = spectral.trace;
    grp.b = spectral.b;
    state.groups.push_back(std::move(grp));
    state.row_lambda_dagger.assign(rows, spectral.lambda_dagger);
  } else {
    const std::size_t dim = ctx.xi.cols() / partition.groups;
    std::vector<RVec> eigs(partition.groups);
    for (std::size_t i = 0; i < rows; ++i) eigs[partition.row_group[i]].push_back(partition.row_eigenvalues[i]);
    for (const auto& e : eigs) state.groups.push_back(make_group(e.size(), dim, e, spectral.b.size() - 1));
    state.row_group = partition.row_group;
    state.row_lambda_dagger.resize(rows);
    for (std::size_t i = 0; i < rows; ++i) state.row_lambda_dagger[i] = state.groups[state.row_group[i]].lambda_dagger;
  }
  state.spectral = std::move(spectral);
  state.memory.assign(rows, cplx{0.0, 0.0});
  mamp_push(state, ctx, CVec(ctx.xi.cols(), cplx{0.0, 0.0}), CVec(ctx.y.begin(), ctx.y.end()));
  return state;
}

void mamp_push(MampState& state, const MleContext& ctx, CVec estimate, CVec res) {
  if (estimate.size() != ctx.xi.cols() || res.size() != ctx.a.rows()) throw SizeError("mamp_push: length mismatch");
  state.estimates.push_back(std::move(estimate));
  state.residuals.push_back(std::move(res));
  const auto k = static_cast<Eigen::Index>(state.residuals.size());
  const std::size_t ng = state.groups.size();
  const CVec& last = state.residuals.back();
  std::vector<RVec> col(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) {
    col[static_cast<std::size_t>(i)] = group_inner(state.residuals[static_cast<std::size_t>(i)], last, state.row_group, ng);
  }
  for (std::size_t g = 0; g < ng; ++g) {
    MleGroup& grp = state.groups[g];
    Eigen::MatrixXd gram(k, k);
    if (k > 1) gram.topLeftCorner(k - 1, k - 1) = grp.residual_gram;
    for (Eigen::Index i = 0; i < k; ++i) gram(i, k - 1) = gram(k - 1, i) = col[static_cast<std::size_t>(i)][g];
    grp.residual_gram = std::move(gram);
    grp.v = covariance_from_gram(grp.residual_gram, grp.rows, ctx.noise_var, grp.trace, ctx.variance_floor);
    grp.v_in = grp.v(k - 1, k - 1);
  }
}

MleOutput mle_step(MampState& state, const MleContext& ctx, std::span<const double> theta_scaled,
                   std::span<const double> xi) {
  const std::size_t t = state.estimates.size();
  const std::size_t ng = state.groups.size();
  if (t == 0) throw SizeError("mle_step: state has no estimates");
  if (theta_scaled.size() != ng) throw SizeError("mle_step: need one theta per group");
  if (!xi.empty() && xi.size() != ng) throw SizeError("mle_step: need one xi per group");
  if (state.groups.front().b.size() < 2 * t + 1) {
    throw SizeError("mle_step: spectral profile too shallow for iteration " + std::to_string(t));
  }

  std::vector<GroupStep> steps;
  steps.reserve(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    std::optional<double> fixed;
    if (!xi.empty()) fixed = xi[g];
    steps.push_back(prepare_group(state.groups[g], t, theta_scaled[g], fixed, ctx.noise_var));
  }

  // Memory recursion with Bn = I - AA^H / lambda_dagger, row-wise group parameters.
  if (t > 1) {
    const CVec adj = ctx.a.apply_adjoint(state.memory);
    const CVec gram = ctx.a.apply(adj);
    for (std::size_t i = 0; i < state.memory.size(); ++i) {
      const std::size_t g = group_of_row(state, i);
      state.memory[i] = theta_scaled[g] * (state.memory[i] - gram[i] / state.row_lambda_dagger[i]);
    }
  }
  const CVec& res = state.residuals.back();
  for (std::size_t i = 0; i < state.memory.size(); ++i) state.memory[i] += steps[group_of_row(state, i)].xi * res[i];
  state.t = t;

  MleOutput out;
  out.r = ctx.xi.apply_adjoint(ctx.a.apply_adjoint(state.memory));
  out.v_gamma.resize(ng);
  out.epsilon.resize(ng);
  out.theta.assign(theta_scaled.begin(), theta_scaled.end());
  out.xi.resize(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    MleGroup& grp = state.groups[g];
    grp.vartheta.resize(t);
    for (std::size_t i = 0; i + 1 < t; ++i) grp.vartheta[i] *= theta_scaled[g];
    grp.vartheta[t - 1] = steps[g].xi;
    double eps = 0.0;
    for (std::size_t i = 0; i < t; ++i) eps += grp.vartheta[i] * grp.b[t - 1 - i];
    if (!(std::abs(eps) >= kDegenerateEpsilon)) {
      throw DegenerateError("mle_step: normalization |eps| = " + std::to_string(std::abs(eps)) + " at t = " +
                            std::to_string(t) + " in group " + std::to_string(g));
    }
    const std::size_t lo = g * grp.dim;
    const std::size_t hi = lo + grp.dim;
    for (std::size_t i = 0; i < t; ++i) {
      const double p = grp.vartheta[i] * grp.b[t - 1 - i];
      if (p == 0.0) continue;
      const CVec& x = state.estimates[i];
      for (std::size_t k = lo; k < hi; ++k) out.r[k] += p * x[k];
    }
    for (std::size_t k = lo; k < hi; ++k) out.r[k] /= eps;

    Eigen::Map<const Eigen::VectorXd> th(grp.vartheta.data(), static_cast<Eigen::Index>(t));
    out.v_gamma[g] = std::max(th.dot(steps[g].g * th) / (eps * eps), ctx.variance_floor);
    out.epsilon[g] = eps;
    out.xi[g] = steps[g].xi;
    grp.v_out = out.v_gamma[g];
  }
  return out;
}

MleOutput mle_step(MampState& state, const MleContext& ctx, double theta_scaled, std::optional<double> xi) {
  const RVec theta(state.groups.size(), theta_scaled);
  RVec xis;
  if (xi) xis.assign(state.groups.size(), *xi);
  return mle_step(state, ctx, theta, xis);
}

// ---------------------------------------------------------------------------

namespace {

struct NleStage {
  CVec posterior_mean;
  CVec s_next;
  RVec v_phi;
  bool stalled = false;
};

// Denoise and orthogonalize each source segment with its own input variance.
NleStage run_nle(const SourcePrior& prior, const CVec& r, std::span<const double> v_gamma) {
  const std::size_t ng = v_gamma.size();
  const std::size_t dim = r.size() / ng;
  NleStage out;
  out.posterior_mean.resize(r.size());
  out.s_next.resize(r.size());
  out.v_phi.resize(ng);
  for (std::size_t g = 0; g < ng; ++g) {
    std::span<const cplx> seg(r.data() + g * dim, dim);
    DenoiserResult den = denoise(prior, seg, v_gamma[g]);
    NleOutput nle = nle_orthogonalize(den, seg, v_gamma[g]);
    std::copy(den.posterior_mean.begin(), den.posterior_mean.end(), out.posterior_mean.begin() + static_cast<std::ptrdiff_t>(g * dim));
    std::copy(nle.s_next.begin(), nle.s_next.end(), out.s_next.begin() + static_cast<std::ptrdiff_t>(g * dim));
    out.v_phi[g] = nle.v_phi;
    out.stalled = out.stalled || nle.stalled;
  }
  return out;
}

double mean_of(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

double max_of(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  return m;
}

}  // namespace

Trajectory run_cd_mamp(const SystemInstance& inst, const LinearOperator& xi, const SourcePrior& prior,
                       const MampConfig& cfg, const BlockPartition& partition, const SpectralProfile* spectral) {
  cfg.validate();
  validate_prior(prior);
  check_dimensions(inst, xi);
  const std::size_t n = xi.cols();
  const bool have_truth = !inst.s_true.empty();
  partition.validate(inst.a.rows(), n);
  if (partition.groups > 1 && !std::holds_alternative<DiagonalStructure>(inst.structure)) {
    throw ConfigError("run_cd_mamp: a block partition needs a diagonal A");
  }

  MleContext ctx{inst.a, xi, inst.y, inst.noise_var, cfg.variance_floor};
  const std::size_t depth = 2 * cfg.max_iters + 2;
  if (spectral != nullptr && spectral->b.size() < depth + 1) throw ConfigError("run_cd_mamp: precomputed spectral profile too shallow");
  MampState state =
      mamp_init(ctx, spectral != nullptr ? *spectral : spectral_profile(inst.a, inst.structure, depth, n), partition);
  const std::size_t ng = state.groups.size();

  Trajectory traj;
  StopRule stop(cfg);
  RVec theta(ng);
  RVec xi_fixed;
  for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
    for (std::size_t g = 0; g < ng; ++g) {
      const MleGroup& grp = state.groups[g];
      switch (cfg.theta) {
        case ThetaSchedule::InverseLambdaDagger: theta[g] = 1.0; break;
        case ThetaSchedule::Regularized:
          theta[g] = grp.lambda_dagger / (grp.lambda_dagger + inst.noise_var / std::max(grp.v_in, cfg.variance_floor));
          break;
        case ThetaSchedule::Custom: theta[g] = cfg.theta_values[std::min(t, cfg.theta_values.size()) - 1]; break;
      }
    }
    if (cfg.xi == XiSchedule::Unit) xi_fixed.assign(ng, 1.0);
    if (cfg.xi == XiSchedule::Custom) xi_fixed.assign(ng, cfg.xi_values[std::min(t, cfg.xi_values.size()) - 1]);

    IterationRecord rec;
    rec.t = t;
    MleOutput mle;
    try {
      mle = mle_step(state, ctx, theta, xi_fixed);
    } catch (const DegenerateError& e) {
      traj.abort_reason = e.what();
      if (!traj.records.empty()) traj.records.back().flags |= kFlagAborted;
      break;
    }
    for (double v : mle.v_gamma) {
      if (v <= cfg.variance_floor) rec.flags |= kFlagVarianceFloor;
    }

    NleStage nle = run_nle(prior, mle.r, mle.v_gamma);
    if (nle.stalled) rec.flags |= kFlagStall;
    rec.v_gamma = mle.mean_v_gamma();
    rec.v_phi = mean_of(nle.v_phi);
    if (have_truth) {
      rec.mse = mse(nle.posterior_mean, inst.s_true);
      rec.mse_db = db(rec.mse);
    }
    traj.estimate = std::move(nle.posterior_mean);
    const bool converged = max_of(nle.v_phi) < cfg.stop_tolerance;
    if (converged) rec.flags |= kFlagConverged;
    traj.records.push_back(rec);
    if (converged || stop.update(rec.mse, have_truth, nle.stalled) || t == cfg.max_iters) break;

    // Transform the new estimate and damp it against the latest ones, per group.
    CVec cand_res = residual(ctx, nle.s_next);
    const std::size_t keep = std::min(cfg.damping_window - 1, state.estimates.size());
    const std::size_t first = state.estimates.size() - keep;
    const auto w = static_cast<Eigen::Index>(keep + 1);
    std::vector<RVec> cand_col;
    for (std::size_t i = first; i < state.estimates.size(); ++i) {
      cand_col.push_back(group_inner(state.residuals[i], cand_res, state.row_group, ng));
    }
    cand_col.push_back(group_inner(cand_res, cand_res, state.row_group, ng));

    std::vector<std::vector<double>> zeta(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      const MleGroup& grp = state.groups[g];
      Eigen::MatrixXd raw(w, w);
      raw.topLeftCorner(w - 1, w - 1) =
          grp.residual_gram.block(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(first), w - 1, w - 1);
      for (Eigen::Index i = 0; i < w; ++i) raw(i, w - 1) = raw(w - 1, i) = cand_col[static_cast<std::size_t>(i)][g];
      const DampingWeights dw =
          damping_weights(covariance_from_gram(raw, grp.rows, inst.noise_var, grp.trace, cfg.variance_floor));
      if (dw.fallback) traj.records.back().flags |= kFlagDampingFallback;
      zeta[g] = dw.zeta;
    }

    auto weight = [&](std::size_t g, std::size_t k) { return zeta[g][k]; };
    const std::size_t dim = n / ng;
    CVec x_new(n, cplx{0.0, 0.0});
    CVec res_new(inst.y.size(), cplx{0.0, 0.0});
    for (std::size_t k = 0; k <= keep; ++k) {
      const CVec& est = k < keep ? state.estimates[first + k] : nle.s_next;
      const CVec& rk = k < keep ? state.residuals[first + k] : cand_res;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = weight(i / dim, k);
        if (z != 0.0) x_new[i] += z * est[i];
      }
      for (std::size_t i = 0; i < res_new.size(); ++i) {
        const double z = weight(group_of_row(state, i), k);
        if (z != 0.0) res_new[i] += z * rk[i];
      }
    }
    mamp_push(state, ctx, std::move(x_new), std::move(res_new));
  }
  return traj;
}

Trajectory run_cd_mamp(const SystemInstance& inst, const SourcePrior& prior, const MampConfig& cfg) {
  return run_cd_mamp(inst, inst.xi, prior, cfg);
}

Trajectory run_cd_oamp(const SystemInstance& inst, const LinearOperator& xi, const SourcePrior& prior,
                       const MampConfig& cfg, const BlockPartition& partition) {
  cfg.validate();
  validate_prior(prior);
  check_dimensions(inst, xi);
  const std::size_t n = xi.cols();
  const bool have_truth = !inst.s_true.empty();
  partition.validate(inst.a.rows(), n);
  const std::size_t ng = partition.groups;
  if (ng > 1 && !std::holds_alternative<DiagonalStructure>(inst.structure)) {
    throw ConfigError("run_cd_oamp: a block partition needs a diagonal A");
  }
  const GramSolver solver(inst.a, inst.structure);
  const RVec& eig = solver.eigenvalues();
  MleContext ctx{inst.a, xi, inst.y, inst.noise_var, cfg.variance_floor};
  const std::size_t dim = n / ng;
  auto row_group = [&](std::size_t i) -> std::size_t { return ng == 1 ? 0 : partition.row_group[i]; };

  CVec x(n, cplx{0.0, 0.0});
  RVec v(ng, signal_power(prior));
  Trajectory traj;
  StopRule stop(cfg);
  for (std::size_t t = 1; t <= cfg.max_iters; ++t) {
    IterationRecord rec;
    rec.t = t;
    RVec eps(ng, 0.0);
    for (std::size_t i = 0; i < eig.size(); ++i) {
      const double vg = v[row_group(i)];
      eps[row_group(i)] += vg * eig[i] / (vg * eig[i] + inst.noise_var);
    }
    bool degenerate = false;
    for (auto& e : eps) {
      e /= static_cast<double>(dim);
      degenerate = degenerate || !(e >= kDegenerateEpsilon);
    }
    if (degenerate) {
      traj.abort_reason = "run_cd_oamp: degenerate normalization";
      if (!traj.records.empty()) traj.records.back().flags |= kFlagAborted;
      break;
    }
    CVec res = residual(ctx, x);
    CVec z;
    if (ng == 1) {
      z = solver.solve(res, v[0], inst.noise_var);
    } else {
      z.resize(res.size());
      for (std::size_t i = 0; i < res.size(); ++i) z[i] = res[i] / (v[row_group(i)] * eig[i] + inst.noise_var);
    }
    CVec corr = xi.apply_adjoint(inst.a.apply_adjoint(z));
    CVec r(n);
    RVec v_gamma(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      v_gamma[g] = std::max(v[g] * (1.0 / eps[g] - 1.0), cfg.variance_floor);
      if (v_gamma[g] <= cfg.variance_floor) rec.flags |= kFlagVarianceFloor;
    }
    for (std::size_t i = 0; i < n; ++i) r[i] = x[i] + (v[i / dim] / eps[i / dim]) * corr[i];

    NleStage nle = run_nle(prior, r, v_gamma);
    if (nle.stalled) rec.flags |= kFlagStall;
    rec.v_gamma = mean_of(v_gamma);
    rec.v_phi = mean_of(nle.v_phi);
    if (have_truth) {
      rec.mse = mse(nle.posterior_mean, inst.s_true);
      rec.mse_db = db(rec.mse);
    }
    traj.estimate = std::move(nle.posterior_mean);
    const bool converged = max_of(nle.v_phi) < cfg.stop_tolerance;
    if (converged) rec.flags |= kFlagConverged;
    traj.records.push_back(rec);
    if (converged || stop.update(rec.mse, have_truth, nle.stalled)) break;
    x = std::move(nle.s_next);
    for (std::size_t g = 0; g < ng; ++g) v[g] = std::max(nle.v_phi[g], cfg.variance_floor);
  }
  return traj;
}

Trajectory run_cd_oamp(const SystemInstance& inst, const SourcePrior& prior, const MampConfig& cfg) {
  return run_cd_oamp(inst, inst.xi, prior, cfg);
}

CVec lmmse_estimate(const SystemInstance& inst, double sigma_s2) {
  const GramSolver solver(inst.a, inst.structure);
  CVec z = solver.solve(inst.y, sigma_s2, inst.noise_var);
  CVec x = inst.a.apply_adjoint(z);
  for (auto& c : x) c *= sigma_s2;
  return inst.xi.apply_adjoint(x);
}

double lmmse_mse_diagonal(std::span<const double> singulars, std::size_t n, double sigma_s2, double sigma2) {
  if (singulars.size() > n) throw SizeError("lmmse_mse_diagonal: more singular values than n");
  double acc = 0.0;
  for (double a : singulars) acc += sigma_s2 * sigma2 / (sigma_s2 * a * a + sigma2);
  acc += static_cast<double>(n - singulars.size()) * sigma_s2;
  return acc / static_cast<double>(n);
}

void write_trajectory_csv_header(std::ostream& os) { os << "trial_seed,t,mse,mse_db,v_gamma,v_phi,flags\n"; }

void write_trajectory_csv(std::ostream& os, std::uint64_t trial_seed, const Trajectory& traj) {
  char line[256];
  for (const auto& r : traj.records) {
    std::snprintf(line, sizeof line, "%llu,%zu,%.17g,%.17g,%.17g,%.17g,%u\n",
                  static_cast<unsigned long long>(trial_seed), r.t, r.mse, r.mse_db, r.v_gamma, r.v_phi, r.flags);
    os << line;
  }
}

}  // namespace ibs
