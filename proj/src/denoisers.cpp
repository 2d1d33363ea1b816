#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ibs/errors.hpp"
#include "ibs/estimators.hpp"

namespace ibs {

namespace {
void require_positive_variance(double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("denoiser: input variance must be positive, got " + std::to_string(v));
}
}  // namespace

DenoiserResult denoise_bernoulli_gaussian(std::span<const cplx> r, double v, double rho, double sigma_s2) {
  require_positive_variance(v);
  if (!(rho > 0.0 && rho <= 1.0) || !(sigma_s2 > 0.0)) throw DomainError("denoiser: invalid Bernoulli-Gaussian prior");
  const double gain = sigma_s2 / (sigma_s2 + v);            // Wiener gain on the active branch
  const double cond_var = sigma_s2 * v / (sigma_s2 + v);   // variance given active
  const double curvature = gain / v;                       // sigma_s2 / (v (sigma_s2 + v))
  // pi(r) = 1 / (1 + exp(log_odds - curvature |r|^2))
  const double log_odds = rho < 1.0 ? std::log((1.0 - rho) / rho) + std::log((sigma_s2 + v) / v)
                                    : -std::numeric_limits<double>::infinity();

  DenoiserResult out;
  out.posterior_mean.resize(r.size());
  double var_acc = 0.0;
  double div_acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double r2 = std::norm(r[i]);
    double pi = 1.0;
    if (rho < 1.0) {
      const double e = std::clamp(log_odds - curvature * r2, -700.0, 700.0);
      pi = 1.0 / (1.0 + std::exp(e));
    }
    const cplx m = gain * r[i];
    out.posterior_mean[i] = pi * m;
    const double m2 = std::norm(m);
    var_acc += pi * (m2 + cond_var) - pi * pi * m2;
    // d/dr [pi(|r|^2) g r] = g (pi + |r|^2 dpi/d|r|^2), dpi/d|r|^2 = pi (1 - pi) curvature
    div_acc += gain * (pi + r2 * pi * (1.0 - pi) * curvature);
  }
  const double n = std::max<std::size_t>(r.size(), 1);
  out.posterior_var = var_acc / n;
  out.divergence = div_acc / n;
  return out;
}

DenoiserResult denoise_qpsk(std::span<const cplx> r, double v) {
  require_positive_variance(v);
  const double a = 1.0 / std::sqrt(2.0);
  const double slope = std::sqrt(2.0) / v;
  DenoiserResult out;
  out.posterior_mean.resize(r.size());
  double var_acc = 0.0;
  double div_acc = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) {
    const double tr = std::tanh(slope * r[i].real());
    const double ti = std::tanh(slope * r[i].imag());
    out.posterior_mean[i] = {a * tr, a * ti};
    var_acc += 0.5 * (1.0 - tr * tr) + 0.5 * (1.0 - ti * ti);
    // Wirtinger derivative: half the sum of the two real-part derivatives.
    div_acc += 0.5 * (a * slope * (1.0 - tr * tr) + a * slope * (1.0 - ti * ti));
  }
  const double n = std::max<std::size_t>(r.size(), 1);
  out.posterior_var = var_acc / n;
  out.divergence = div_acc / n;
  return out;
}

DenoiserResult denoise(const SourcePrior& prior, std::span<const cplx> r, double v) {
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) {
    return denoise_bernoulli_gaussian(r, v, bg->rho, bg->sigma_s2);
  }
  return denoise_qpsk(r, v);
}

NleOutput nle_orthogonalize(const DenoiserResult& den, std::span<const cplx> r, double v_in) {
  require_positive_variance(v_in);
  NleOutput out;
  if (!(den.posterior_var > 0.0) || den.posterior_var >= v_in) {
    out.s_next.assign(r.begin(), r.end());
    out.v_phi = v_in;
    out.stalled = true;
    return out;
  }
  const double p = den.posterior_var / v_in;
  const double eps = 1.0 - p;
  out.s_next.resize(r.size());
  for (std::size_t i = 0; i < r.size(); ++i) out.s_next[i] = (den.posterior_mean[i] - p * r[i]) / eps;
  out.v_phi = 1.0 / (1.0 / den.posterior_var - 1.0 / v_in);
  return out;
}

}  // namespace ibs
