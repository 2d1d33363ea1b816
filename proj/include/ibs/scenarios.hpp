#pragma once

#include <cstdint>
#include <optional>
#include <variant>

#include "ibs/linear_operator.hpp"
#include "json.hpp"

namespace ibs {

/// Singular values of the compressed-sensing operator: a geometric sequence
/// with ratio kappa^{1/m} between neighbours, scaled so that sum alpha^2 = n.
struct SensingDiagonal {
  std::size_t m = 0;
  std::size_t n = 0;
  double kappa = 1.0;
  RVec singulars;

  LinearOperator op() const;
};

SensingDiagonal gen_sensing_diagonal(std::size_t m, std::size_t n, double kappa);

struct ChannelTap {
  std::size_t delay = 0;
  cplx gain{1.0, 0.0};
  double doppler = 0.0;  // cycles per sample
  double phase = 0.0;    // initial phase of the Doppler rotation
};

/// P-tap cyclic multipath channel. Row i has its non-zeros at columns
/// (i - delay_p) mod n with value gain_p * exp(j (2 pi doppler_p i + phase_p)).
/// With all Doppler shifts zero the matrix is circulant.
struct MultipathChannel {
  std::size_t n = 0;
  std::vector<ChannelTap> taps;

  bool time_varying() const;
  /// First column of the circulant matrix (static channels only).
  CVec circulant_column() const;
  LinearOperator op() const;
};

/// Carrier 4 GHz, 100 km/h, 960 kHz sampling: max Doppler in cycles/sample.
inline constexpr double kJakes4GHz100kmhSpread = 370.37 / 960.0e3;

/// `p` taps at distinct uniform delays in [0, n), CN(0,1) gains scaled to
/// unit total power. With doppler_spread > 0 each tap gets a Doppler shift
/// spread * cos(angle) with a uniform arrival angle (one sinusoid per tap).
MultipathChannel gen_multipath_channel(std::size_t n, std::size_t p, double doppler_spread, std::uint64_t seed);

struct BernoulliGaussian {
  double rho = 0.1;
  double sigma_s2 = 10.0;
};
struct Qpsk {};
using SourcePrior = std::variant<BernoulliGaussian, Qpsk>;

void validate_prior(const SourcePrior& prior);
double signal_power(const SourcePrior& prior);
bool is_qpsk(const SourcePrior& prior);

CVec sample_source(const SourcePrior& prior, std::size_t n, std::uint64_t seed);

// Structure of A that admits an exact spectrum and fast Gram solves.
struct DiagonalStructure {
  RVec singulars;
};
struct CirculantStructure {
  CVec column;
};
struct GeneralStructure {};
using OperatorStructure = std::variant<DiagonalStructure, CirculantStructure, GeneralStructure>;

/// One realized problem y = A Xi s + n.
struct SystemInstance {
  LinearOperator a;
  OperatorStructure structure;
  LinearOperator xi;
  CVec s_true;
  CVec y;
  double noise_var = 0.0;
  std::uint64_t noise_seed = 0;
};

/// noise_var = 10^{-snr_db/10}; snr_db = +infinity gives a noiseless y.
SystemInstance simulate_observation(const LinearOperator& a, OperatorStructure structure, const LinearOperator& xi,
                                    CVec s, double snr_db, std::uint64_t seed);

struct Metrics {
  double mse = 0.0;
  double mse_db = 0.0;
  std::optional<double> ber;
};

double mse(const CVec& estimate, const CVec& truth);
/// Gray-mapped QPSK: one bit per real/imaginary sign.
double qpsk_ber(const CVec& estimate, const CVec& truth);
/// Throws UnsupportedMetricError if want_ber and the prior is not QPSK.
Metrics metrics(const CVec& estimate, const CVec& truth, const SourcePrior& prior, bool want_ber = false);

/// (s, y, seeds) as one JSON-lines record for cross-implementation checks.
nlohmann::ordered_json instance_record(const SystemInstance& inst, std::uint64_t source_seed);

}  // namespace ibs
