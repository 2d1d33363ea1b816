#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "ibs/harness.hpp"
#include "ibs/rng.hpp"
#include "ibs/spectral.hpp"
#include "ibs/transform.hpp"

namespace ibs {

namespace {

CVec random_cvec(std::size_t n, Xoshiro256& rng) {
  CVec v(n);
  for (auto& x : v) x = {rng.normal(), rng.normal()};
  return v;
}

double max_abs_diff(const CVec& a, const CVec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double re_corr(const CVec& a, const CVec& b) {
  const double na = std::sqrt(squared_norm(a));
  const double nb = std::sqrt(squared_norm(b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::abs(inner(a, b).real()) / (na * nb);
}

CVec minus(const CVec& a, const CVec& b) {
  CVec d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

class Report {
 public:
  explicit Report(std::ostream& os) : os_(os) {}

  // Passes when value <= bound.
  void check(const std::string& name, double value, double bound) {
    const bool ok = value <= bound && std::isfinite(value);
    line(name, ok, value, bound, "<=");
  }
  void check_at_least(const std::string& name, double value, double bound) {
    const bool ok = value >= bound;
    line(name, ok, value, bound, ">=");
  }
  bool all_passed() const { return failures_ == 0; }

 private:
  void line(const std::string& name, bool ok, double value, double bound, const char* rel) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "[%s] %-52s measured %.3e %s %.3e", ok ? "PASS" : "FAIL", name.c_str(), value, rel,
                  bound);
    os_ << buf << "\n";
    if (!ok) ++failures_;
  }

  std::ostream& os_;
  int failures_ = 0;
};

double naive_dft_error(std::size_t n, Xoshiro256& rng) {
  const CVec v = random_cvec(n, rng);
  CVec ref(n);
  for (std::size_t k = 0; k < n; ++k) {
    cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) {
      acc += v[j] * std::polar(1.0, -2.0 * kPi * static_cast<double>((k * j) % n) / static_cast<double>(n));
    }
    ref[k] = acc / std::sqrt(static_cast<double>(n));
  }
  return max_abs_diff(fft_forward(v), ref);
}

double naive_hadamard_error(std::size_t n, Xoshiro256& rng) {
  const CVec v = random_cvec(n, rng);
  CVec ref(n);
  for (std::size_t i = 0; i < n; ++i) {
    cplx acc{0.0, 0.0};
    for (std::size_t j = 0; j < n; ++j) acc += (std::popcount(i & j) % 2 == 0 ? 1.0 : -1.0) * v[j];
    ref[i] = acc / std::sqrt(static_cast<double>(n));
  }
  return max_abs_diff(fwht_forward(v), ref);
}

double adjoint_error(const LinearOperator& op, Xoshiro256& rng) {
  const CVec v = random_cvec(op.cols(), rng);
  const CVec u = random_cvec(op.rows(), rng);
  const cplx lhs = inner(u, op.apply(v));
  const cplx rhs = inner(op.apply_adjoint(u), v);
  return std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300);
}

double unitarity_error(const LinearOperator& op) {
  const Eigen::MatrixXcd x = materialize_dense(op);
  const Eigen::MatrixXcd g = x * x.adjoint() - Eigen::MatrixXcd::Identity(x.rows(), x.rows());
  return g.cwiseAbs().maxCoeff();
}

}  // namespace

double nle_error_correlation(const SourcePrior& prior, std::size_t n, double v, std::uint64_t seed, bool flip_sign) {
  const CVec s = sample_source(prior, n, derive_seed(seed, "source"));
  Xoshiro256 rng(derive_seed(seed, "noise"));
  const double sd = std::sqrt(v / 2.0);
  CVec r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = s[i] + cplx{sd * rng.normal(), sd * rng.normal()};
  const DenoiserResult den = denoise(prior, r, v);
  CVec out;
  if (flip_sign) {
    const double p = den.posterior_var / v;
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = (den.posterior_mean[i] + p * r[i]) / (1.0 - p);
  } else {
    out = nle_orthogonalize(den, r, v).s_next;
  }
  const CVec e_out = minus(out, s);
  const CVec e_in = minus(r, s);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += (std::conj(e_out[i]) * e_in[i]).real();
  return std::abs(acc) / (static_cast<double>(n) * v);
}

double mle_error_correlation(std::size_t n, std::uint64_t seed, std::size_t iterations) {
  const std::size_t m = n / 2;
  const BernoulliGaussian bg{};
  const SourcePrior prior = bg;
  const SensingDiagonal sd = gen_sensing_diagonal(m, n, 10.0);
  const LinearOperator a = sd.op();
  const LinearOperator xi = build_full_transform(n, m, TransformBase::FFT, TransformDirection::Kernel,
                                                 derive_seed(seed, "full-perm"));
  const CVec s = sample_source(prior, n, derive_seed(seed, "source"));
  const SystemInstance inst = simulate_observation(a, DiagonalStructure{sd.singulars}, xi, s, 30.0,
                                                   derive_seed(seed, "noise"));
  const MleContext ctx{a, xi, inst.y, inst.noise_var, 1e-13};
  MampState state = mamp_init(ctx, spectral_profile(a, inst.structure, 2 * iterations + 2, n));

  double worst = 0.0;
  for (std::size_t t = 1; t <= iterations; ++t) {
    const MleGroup& g = state.groups[0];
    const double theta = g.lambda_dagger / (g.lambda_dagger + inst.noise_var / std::max(g.v_in, 1e-13));
    const MleOutput mle = mle_step(state, ctx, theta, std::nullopt);
    const CVec err = minus(mle.r, s);
    for (const auto& x : state.estimates) worst = std::max(worst, re_corr(err, minus(x, s)));
    const double v = mle.mean_v_gamma();
    const NleOutput nle = nle_orthogonalize(denoise(prior, mle.r, v), mle.r, v);
    if (t == iterations) break;
    CVec res = inst.y;
    const CVec ax = a.apply(xi.apply(nle.s_next));
    for (std::size_t i = 0; i < res.size(); ++i) res[i] -= ax[i];
    mamp_push(state, ctx, nle.s_next, std::move(res));
  }
  return worst;
}

bool run_selftest(std::ostream& os, const SelftestOptions& opts) {
  Report rep(os);
  Xoshiro256 rng(derive_seed(opts.seed, "selftest"));

  {
    double worst = 0.0;
    for (std::size_t n = 2; n <= 256; n *= 2) worst = std::max(worst, naive_dft_error(n, rng));
    rep.check("fft vs naive DFT, n = 2..256", worst, tol::kKernelOracle);
  }
  {
    double worst = 0.0;
    for (std::size_t n = 2; n <= 256; n *= 2) worst = std::max(worst, naive_hadamard_error(n, rng));
    rep.check("fwht vs naive Hadamard, n = 2..256", worst, tol::kKernelOracle);
  }
  {
    const CVec v = random_cvec(256, rng);
    const double e = squared_norm(v);
    const double dev = std::max(std::abs(squared_norm(fft_forward(v)) - e), std::abs(squared_norm(fwht_forward(v)) - e));
    rep.check("energy preservation fft/fwht, n = 256", dev / e, 1e-12);
    rep.check("fwht involution, n = 256", max_abs_diff(fwht_forward(fwht_forward(v)), v), 1e-12);
    rep.check("fft inverse round trip, n = 256", max_abs_diff(fft_inverse(fft_forward(v)), v), 1e-12);
  }
  {
    const Permutation p = make_permutation(97, 11);
    const CVec v = random_cvec(97, rng);
    rep.check("permutation inverse round trip", max_abs_diff(p.apply_inverse(p.apply(v)), v), 0.0);
    const Permutation q = make_permutation(97, 11);
    double diff = 0.0;
    for (std::size_t i = 0; i < 97; ++i) diff += p[i] != q[i];
    rep.check("permutation reproducible from seed", diff, 0.0);
  }

  {
    double adj = 0.0;
    double uni = 0.0;
    for (auto variant : {IbsVariant::BS, IbsVariant::W_IBS, IbsVariant::B_IBS, IbsVariant::BW_IBS}) {
      for (auto base : {TransformBase::FFT, TransformBase::FWHT}) {
        for (auto dir : {TransformDirection::Kernel, TransformDirection::KernelAdjoint}) {
          const IbsSpec spec{256, 32, 128, variant, base, dir, derive_seed(opts.seed, "block"), derive_seed(opts.seed, "whole")};
          const LinearOperator x = build_ibs_transform(spec);
          adj = std::max(adj, adjoint_error(x, rng));
          uni = std::max(uni, unitarity_error(x));
        }
      }
    }
    rep.check("ibs adjoint consistency, all variants", adj, tol::kAdjoint);
    rep.check("ibs row orthonormality, all variants", uni, tol::kUnitary);
  }

  {
    const double theta_ref[] = {58.33, 41.67, 25.00, 16.67};
    const double overall_ref[] = {69.69, 57.57, 45.45, 39.39};
    const std::size_t ns[] = {128, 32, 8, 4};
    double worst = 0.0;
    for (int i = 0; i < 4; ++i) {
      const RelativeComplexity rc = relative_complexity(4096, ns[i], 8.0);
      worst = std::max(worst, std::abs(100.0 * rc.theta_ibs - theta_ref[i]));
      worst = std::max(worst, std::abs(100.0 * rc.overall - overall_ref[i]));
    }
    rep.check("relative complexity table, n = 4096, p = 8", worst, 0.01);
  }

  {
    const SensingDiagonal sd = gen_sensing_diagonal(100, 256, 10.0);
    double energy = 0.0;
    for (double a : sd.singulars) energy += a * a;
    rep.check("sensing diagonal energy", std::abs(energy - 256.0) / 256.0, tol::kConstraint);
    const double ratio = sd.singulars.front() / sd.singulars.back();
    rep.check("sensing diagonal condition ratio", std::abs(ratio / std::pow(10.0, 99.0 / 100.0) - 1.0), tol::kConstraint);
  }

  {
    RVec diag(200);
    for (auto& d : diag) d = 0.2 + rng.uniform();
    CVec cdiag(diag.begin(), diag.end());
    const LinearOperator a = diagonal_operator(cdiag);
    RVec eig(diag.size());
    for (std::size_t i = 0; i < diag.size(); ++i) eig[i] = diag[i] * diag[i];
    const double lmin = *std::min_element(eig.begin(), eig.end());
    const double lmax = *std::max_element(eig.begin(), eig.end());
    const double ld = 0.5 * (lmin + lmax);
    const RVec w = trace_moments(eig, ld, 6, 256);
    const RVec b = scaled_moments_stochastic(a, ld, 6, 256);
    double worst = 0.0;
    for (std::size_t k = 0; k <= 6; ++k) {
      const double exact = w[k] / std::pow(ld, static_cast<double>(k));
      worst = std::max(worst, std::abs(b[k] - exact) / std::max(std::abs(exact), 1e-300));
    }
    rep.check("stochastic vs exact moments, T = 6", worst, 0.01);
    double bound = 0.0;
    for (std::size_t k = 0; k <= 6; ++k) {
      const double lim = w[0] * std::pow(0.5 * (lmax - lmin), static_cast<double>(k));
      bound = std::max(bound, std::abs(w[k]) / lim - 1.0);
    }
    rep.check("moment spectral-radius bound", bound, 1e-12);
  }

  {
    const CVec r = random_cvec(512, rng);
    const double v = 0.7;
    const double rho = 0.1;
    const double s2 = 10.0;
    const DenoiserResult bg = denoise_bernoulli_gaussian(r, v, rho, s2);
    double mean_err = 0.0;
    double var_ref = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double r2 = std::norm(r[i]);
      const double on = rho / (kPi * (s2 + v)) * std::exp(-r2 / (s2 + v));
      const double off = (1.0 - rho) / (kPi * v) * std::exp(-r2 / v);
      const double pi = on / (on + off);
      const cplx m1 = s2 / (s2 + v) * r[i];
      const cplx mean = pi * m1;
      mean_err = std::max(mean_err, std::abs(mean - bg.posterior_mean[i]));
      var_ref += pi * (s2 * v / (s2 + v) + std::norm(m1)) - std::norm(mean);
    }
    var_ref /= static_cast<double>(r.size());
    rep.check("bernoulli-gaussian denoiser vs mixture oracle", std::max(mean_err, std::abs(var_ref - bg.posterior_var)), 1e-12);

    const DenoiserResult q = denoise_qpsk(r, v);
    mean_err = 0.0;
    var_ref = 0.0;
    const double a = 1.0 / std::sqrt(2.0);
    const cplx pts[] = {{a, a}, {a, -a}, {-a, a}, {-a, -a}};
    for (std::size_t i = 0; i < r.size(); ++i) {
      double wsum = 0.0;
      cplx acc{0.0, 0.0};
      double ref = std::norm(r[i] - pts[0]);
      for (const auto& c : pts) ref = std::min(ref, std::norm(r[i] - c));
      for (const auto& c : pts) {
        const double wgt = std::exp(-(std::norm(r[i] - c) - ref) / v);
        wsum += wgt;
        acc += wgt * c;
      }
      const cplx mean = acc / wsum;
      mean_err = std::max(mean_err, std::abs(mean - q.posterior_mean[i]));
      var_ref += 1.0 - std::norm(mean);
    }
    var_ref /= static_cast<double>(r.size());
    rep.check("qpsk denoiser vs enumeration oracle", std::max(mean_err, std::abs(var_ref - q.posterior_var)), 1e-12);
  }

  {
    double excess = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const int w = 2 + trial % 2;
      Eigen::MatrixXd g(w, w);
      for (int i = 0; i < w; ++i) {
        for (int j = 0; j < w; ++j) g(i, j) = rng.normal();
      }
      const Eigen::MatrixXd v = g * g.transpose() + 1e-3 * Eigen::MatrixXd::Identity(w, w);
      const DampingWeights dw = damping_weights(v);
      double sum = 0.0;
      for (double z : dw.zeta) sum += z;
      excess = std::max(excess, std::abs(sum - 1.0));
      excess = std::max(excess, dw.predicted_var - v.diagonal().minCoeff());
    }
    rep.check("damping weights sum to one and beat min diag", excess, 1e-12);
  }

  {
    const double corr = nle_error_correlation(BernoulliGaussian{}, 16384, 0.5, opts.seed, opts.inject_nle_sign_error);
    rep.check("nle error orthogonality, n = 16384", corr, 0.02);
    const double corr_q = nle_error_correlation(Qpsk{}, 16384, 0.5, opts.seed, opts.inject_nle_sign_error);
    rep.check("nle error orthogonality qpsk, n = 16384", corr_q, 0.02);
  }
  rep.check("mle error orthogonality, n = 16384", mle_error_correlation(16384, opts.seed), 0.05);

  {
    const std::size_t n = 1024;
    const std::size_t m = 512;
    const SensingDiagonal sd = gen_sensing_diagonal(m, n, 10.0);
    const LinearOperator xi = build_full_transform(n, m, TransformBase::FFT, TransformDirection::Kernel, 3);
    const SourcePrior gauss = BernoulliGaussian{1.0, 1.0};
    const SystemInstance inst = simulate_observation(sd.op(), DiagonalStructure{sd.singulars}, xi,
                                                     sample_source(gauss, n, derive_seed(opts.seed, "lmmse")), 30.0,
                                                     derive_seed(opts.seed, "lmmse-noise"));
    MampConfig mc;
    mc.max_iters = 30;
    const Trajectory oamp = run_cd_oamp(inst, xi, gauss, mc);
    const CVec ref = lmmse_estimate(inst, 1.0);
    rep.check("oamp fixed point vs closed-form lmmse, n = 1024",
              std::sqrt(squared_norm(minus(oamp.estimate, ref)) / squared_norm(ref)), 1e-8);
  }

  {
    ExperimentConfig cfg = default_config("cs-mse");
    cfg.n = 256;
    cfg.n_s = 32;
    cfg.trials = 2;
    cfg.max_iters = 8;
    cfg.seed = opts.seed;
    const CsMseResult one = run_cs_mse(cfg, {});
    cfg.threads = 2;
    const CsMseResult two = run_cs_mse(cfg, {});
    double diff = 0.0;
    for (std::size_t i = 0; i < one.summary.size(); ++i) {
      for (std::size_t k = 0; k < one.summary[i].per_trial.size(); ++k) {
        diff = std::max(diff, std::abs(one.summary[i].per_trial[k] - two.summary[i].per_trial[k]));
      }
    }
    rep.check("cs-mse determinism across thread counts", diff, 0.0);
  }

  return rep.all_passed();
}

}  // namespace ibs
