#include "ibs/scenarios.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ibs/errors.hpp"
#include "ibs/rng.hpp"

namespace ibs {

LinearOperator SensingDiagonal::op() const {
  CVec d(singulars.begin(), singulars.end());
  return diagonal_operator(std::move(d));
}

SensingDiagonal gen_sensing_diagonal(std::size_t m, std::size_t n, double kappa) {
  if (m == 0 || m > n) throw ConfigError("sensing diagonal: need 1 <= m <= n");
  if (!(kappa >= 1.0) || !std::isfinite(kappa)) throw ConfigError("sensing diagonal: kappa must be >= 1");
  SensingDiagonal out{m, n, kappa, RVec(m)};
  // alpha_i = c * kappa^{-i/m}, then fix c from sum alpha^2 = n.
  double energy = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    out.singulars[i] = std::pow(kappa, -static_cast<double>(i) / static_cast<double>(m));
    energy += out.singulars[i] * out.singulars[i];
  }
  const double scale = std::sqrt(static_cast<double>(n) / energy);
  for (auto& a : out.singulars) a *= scale;
  return out;
}

bool MultipathChannel::time_varying() const {
  return std::any_of(taps.begin(), taps.end(), [](const ChannelTap& t) { return t.doppler != 0.0; });
}

CVec MultipathChannel::circulant_column() const {
  if (time_varying()) throw ConfigError("circulant column requested for a time-varying channel");
  CVec col(n, cplx{0.0, 0.0});
  for (const auto& t : taps) col[t.delay] += t.gain * std::polar(1.0, t.phase);
  return col;
}

LinearOperator MultipathChannel::op() const {
  const std::size_t size = n;
  const auto tap_list = taps;
  // Per-sample gains g_p(i); for static channels every row repeats.
  std::vector<CVec> gains(tap_list.size(), CVec(size));
  for (std::size_t p = 0; p < tap_list.size(); ++p) {
    for (std::size_t i = 0; i < size; ++i) {
      const double cycles = std::fmod(tap_list[p].doppler * static_cast<double>(i), 1.0);
      gains[p][i] = tap_list[p].gain * std::polar(1.0, 2.0 * kPi * cycles + tap_list[p].phase);
    }
  }
  auto shared = std::make_shared<const std::vector<CVec>>(std::move(gains));
  std::vector<std::size_t> delays;
  for (const auto& t : tap_list) delays.push_back(t.delay);
  auto fwd = [size, shared, delays](std::span<const cplx> in, std::span<cplx> out) {
    std::fill(out.begin(), out.end(), cplx{0.0, 0.0});
    for (std::size_t p = 0; p < delays.size(); ++p) {
      const auto& g = (*shared)[p];
      const std::size_t d = delays[p];
      for (std::size_t i = 0; i < size; ++i) out[i] += g[i] * in[(i + size - d) % size];
    }
  };
  auto adj = [size, shared, delays](std::span<const cplx> in, std::span<cplx> out) {
    std::fill(out.begin(), out.end(), cplx{0.0, 0.0});
    for (std::size_t p = 0; p < delays.size(); ++p) {
      const auto& g = (*shared)[p];
      const std::size_t d = delays[p];
      for (std::size_t i = 0; i < size; ++i) out[(i + size - d) % size] += std::conj(g[i]) * in[i];
    }
  };
  return function_operator(size, size, fwd, adj, "channel(" + std::to_string(size) + ")");
}

MultipathChannel gen_multipath_channel(std::size_t n, std::size_t p, double doppler_spread, std::uint64_t seed) {
  if (p == 0) throw ConfigError("multipath channel needs at least one tap");
  if (p >= n) throw ConfigError("multipath channel: p must be smaller than n");
  if (doppler_spread < 0.0) throw ConfigError("doppler spread must be non-negative");
  Xoshiro256 rng(seed);
  // Distinct delays: partial Fisher-Yates over {0..n-1}.
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  MultipathChannel ch{n, {}};
  double power = 0.0;
  for (std::size_t k = 0; k < p; ++k) {
    const auto j = k + static_cast<std::size_t>(rng.uniform_index(n - k));
    std::swap(pool[k], pool[j]);
    ChannelTap tap;
    tap.delay = pool[k];
    tap.gain = rng.complex_normal(1.0);
    if (doppler_spread > 0.0) {
      tap.doppler = doppler_spread * std::cos(2.0 * kPi * rng.uniform());
      tap.phase = 2.0 * kPi * rng.uniform();
    }
    power += std::norm(tap.gain);
    ch.taps.push_back(tap);
  }
  const double scale = 1.0 / std::sqrt(power);
  for (auto& t : ch.taps) t.gain *= scale;
  std::sort(ch.taps.begin(), ch.taps.end(), [](const ChannelTap& a, const ChannelTap& b) { return a.delay < b.delay; });
  return ch;
}

void validate_prior(const SourcePrior& prior) {
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) {
    if (!(bg->rho > 0.0 && bg->rho <= 1.0)) throw ConfigError("Bernoulli-Gaussian rho must lie in (0, 1]");
    if (!(bg->sigma_s2 > 0.0)) throw ConfigError("Bernoulli-Gaussian sigma_s2 must be positive");
  }
}

double signal_power(const SourcePrior& prior) {
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) return bg->rho * bg->sigma_s2;
  return 1.0;
}

bool is_qpsk(const SourcePrior& prior) { return std::holds_alternative<Qpsk>(prior); }

CVec sample_source(const SourcePrior& prior, std::size_t n, std::uint64_t seed) {
  validate_prior(prior);
  Xoshiro256 rng(seed);
  CVec s(n);
  if (const auto* bg = std::get_if<BernoulliGaussian>(&prior)) {
    for (auto& z : s) {
      // Both draws are taken every time so the stream layout is fixed.
      const bool active = rng.uniform() < bg->rho;
      const cplx g = rng.complex_normal(bg->sigma_s2);
      z = active ? g : cplx{0.0, 0.0};
    }
  } else {
    const double a = 1.0 / std::sqrt(2.0);
    for (auto& z : s) {
      const std::uint64_t bits = rng.uniform_index(4);
      z = {(bits & 1U) ? -a : a, (bits & 2U) ? -a : a};
    }
  }
  return s;
}

SystemInstance simulate_observation(const LinearOperator& a, OperatorStructure structure, const LinearOperator& xi,
                                    CVec s, double snr_db, std::uint64_t seed) {
  if (xi.cols() != s.size()) throw ConfigError("simulate_observation: Xi columns do not match the source length");
  if (a.cols() != xi.rows()) throw ConfigError("simulate_observation: A columns do not match Xi rows");
  const double noise_var = std::isinf(snr_db) && snr_db > 0 ? 0.0 : std::pow(10.0, -snr_db / 10.0);
  CVec y = a.apply(xi.apply(s));
  if (noise_var > 0.0) {
    Xoshiro256 rng(seed);
    for (auto& z : y) z += rng.complex_normal(noise_var);
  }
  return SystemInstance{a, std::move(structure), xi, std::move(s), std::move(y), noise_var, seed};
}

double mse(const CVec& estimate, const CVec& truth) {
  if (estimate.size() != truth.size() || truth.empty()) throw SizeError("mse: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) acc += std::norm(estimate[i] - truth[i]);
  return acc / static_cast<double>(truth.size());
}

double qpsk_ber(const CVec& estimate, const CVec& truth) {
  if (estimate.size() != truth.size() || truth.empty()) throw SizeError("ber: length mismatch");
  std::size_t errors = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    errors += (std::signbit(estimate[i].real()) != std::signbit(truth[i].real())) ? 1 : 0;
    errors += (std::signbit(estimate[i].imag()) != std::signbit(truth[i].imag())) ? 1 : 0;
  }
  return static_cast<double>(errors) / (2.0 * static_cast<double>(truth.size()));
}

Metrics metrics(const CVec& estimate, const CVec& truth, const SourcePrior& prior, bool want_ber) {
  Metrics out;
  out.mse = mse(estimate, truth);
  out.mse_db = out.mse > 0.0 ? 10.0 * std::log10(out.mse) : -std::numeric_limits<double>::infinity();
  if (want_ber) {
    if (!is_qpsk(prior)) throw UnsupportedMetricError("BER is only defined for QPSK sources");
    out.ber = qpsk_ber(estimate, truth);
  }
  return out;
}

nlohmann::ordered_json instance_record(const SystemInstance& inst, std::uint64_t source_seed) {
  auto pack = [](const CVec& v) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& z : v) arr.push_back({z.real(), z.imag()});
    return arr;
  };
  return nlohmann::ordered_json{{"schema_version", 1},
                                {"source_seed", source_seed},
                                {"noise_seed", inst.noise_seed},
                                {"noise_var", inst.noise_var},
                                {"s", pack(inst.s_true)},
                                {"y", pack(inst.y)}};
}

}  // namespace ibs
