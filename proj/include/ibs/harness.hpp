#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "ibs/estimators.hpp"
#include "ibs/ibs_builder.hpp"
#include "json.hpp"

namespace ibs {

inline constexpr int kSchemaVersion = 1;

/// Declarative description of one experiment. Serialized as a flat JSON
/// object; unknown keys are rejected.
struct ExperimentConfig {
  std::string experiment = "cs-mse";  // cs-mse | ifdm-ber | complexity-table | selftest
  std::uint64_t seed = 1;
  std::size_t trials = 20;
  std::size_t threads = 1;
  std::string output_path = "results";

  // Problem size. m = 0 means round(delta * n).
  std::size_t n = 8192;
  std::size_t n_s = 256;
  std::size_t m = 0;
  double delta = 0.5;
  double kappa = 10.0;
  std::vector<double> snr_db{30.0};

  // Source prior.
  std::string prior = "bernoulli-gaussian";  // bernoulli-gaussian | qpsk
  double rho = 0.1;
  double sigma_s2 = 10.0;

  // cs-mse schemes: "full" plus IBS variants.
  std::vector<std::string> variants{"full", "BS", "W_IBS", "B_IBS", "BW_IBS"};
  std::vector<std::string> bases{"FFT"};

  // Estimator.
  std::string estimator = "mamp";  // mamp | oamp
  std::size_t max_iters = 60;
  std::size_t damping_window = 3;
  std::string theta_schedule = "regularized";
  std::string xi_schedule = "optimal";
  std::string mle_normalization = "blockwise";  // blockwise | global
  double variance_floor = 1e-13;
  double stop_tolerance = 1e-12;
  std::size_t stall_patience = 3;

  // ifdm-ber.
  std::vector<std::size_t> block_sizes{1024, 128, 32};  // block size == n is full IFDM
  std::size_t paths = 4;
  std::string channel = "static";  // static | jakes-4ghz-100kmh
  double target_ber = 1e-3;

  // complexity-table.
  std::vector<std::size_t> table_block_sizes{128, 32, 8, 4};
  double complexity_p = 8.0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  std::size_t rows() const;
  MampConfig mamp_config() const;
  SourcePrior source_prior() const;
  bool operator==(const ExperimentConfig&) const = default;
};

void to_json(nlohmann::ordered_json& j, const ExperimentConfig& c);
void from_json(const nlohmann::ordered_json& j, ExperimentConfig& c);

/// Defaults for one experiment kind: n = 8192 for cs-mse, n = 1024 with QPSK
/// and both bases for ifdm-ber, n = 4096 for complexity-table.
ExperimentConfig default_config(const std::string& experiment);

/// Parses a JSON document over default_config(experiment); syntax errors
/// keep the parser's line/column text.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// 16 hex digits of FNV-1a over the compact canonical JSON.
std::string config_hash(const ExperimentConfig& c);

/// Per-trial seed: derive_seed(master, "trial", index).
std::uint64_t trial_seed(std::uint64_t master, std::size_t index);

/// Runs `count` jobs on up to `threads` workers; job(i) writes only slot i.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job);

struct SummaryRow {
  std::string scheme;
  std::string base;
  std::size_t n_s = 0;
  double snr_db = 0.0;
  std::size_t trials = 0;
  double mean = 0.0;       // mse or ber
  double half_width = 0.0; // 1.96 sd / sqrt(trials)
  double mean_iters = 0.0;
  std::vector<double> per_trial;
};

struct CsMseResult {
  std::vector<SummaryRow> summary;
  std::string config_hash;
};

struct IfdmBerResult {
  std::vector<SummaryRow> summary;  // mean = BER over all trials
  std::string config_hash;
};

struct ComplexityRow {
  std::size_t n_s = 0;
  double theta_pct = 0.0;
  double overall_pct = 0.0;
};

/// Compressed sensing mse experiment. Writes cs_mse_trajectories.csv,
/// cs_mse_summary.csv and cs_mse.json into `out_dir` (skipped when empty).
CsMseResult run_cs_mse(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// IFDM BER sweep. Writes ifdm_ber.csv, ifdm_ber_trials.csv and ifdm_ber.json.
IfdmBerResult run_ifdm_ber(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// Relative complexity table. Writes complexity.csv and complexity.json.
std::vector<ComplexityRow> run_complexity_table(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

/// |Re <s_next - s, r - s>| / (n v) for r = s + CN(0, v), n coordinates of
/// `prior`. `flip_sign` uses
/// (mean + p r) / (1 - p) instead, which must break orthogonality.
double nle_error_correlation(const SourcePrior& prior, std::size_t n, double v, std::uint64_t seed,
                             bool flip_sign = false);

/// Runs `iterations` undamped MLE/NLE rounds of the memory estimator on a
/// diagonal compressed-sensing instance (n, m = n / 2, kappa 10, 30 dB, BG
/// prior, full FFT transform) and returns the largest |Re corr| between the
/// MLE output error and the error of any earlier estimate.
double mle_error_correlation(std::size_t n, std::uint64_t seed, std::size_t iterations = 4);

struct SelftestOptions {
  bool inject_nle_sign_error = false;  // mutation canary for the orthogonality check
  std::uint64_t seed = 7;
};

/// Runs the invariant suite at small sizes; one line per check. Returns true
/// when every check passes.
bool run_selftest(std::ostream& os, const SelftestOptions& opts = {});

}  // namespace ibs
