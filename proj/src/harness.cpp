#include "ibs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "ibs/errors.hpp"
#include "ibs/rng.hpp"
#include "ibs/transform.hpp"

namespace ibs {

namespace {

using json = nlohmann::ordered_json;

const char* const kExperiments[] = {"cs-mse", "ifdm-ber", "complexity-table", "selftest"};

json snr_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? json("inf") : json("-inf");
  return json(v);
}

double snr_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw ConfigError("snr_db: only numbers or \"inf\" are accepted, got \"" + s + "\"");
  }
  return j.get<double>();
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  try {
    out = j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string fmt_fixed(double x, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError("config key '" + key + "': " + what);
}

bool pow2(std::size_t n) { return is_power_of_two(n); }

json environment() {
  json env;
#if defined(__clang__)
  env["compiler"] = "clang " __clang_version__;
#elif defined(__GNUC__)
  env["compiler"] = "gcc " __VERSION__;
#else
  env["compiler"] = "unknown";
#endif
  env["cxx_standard"] = static_cast<long>(__cplusplus);
  env["prng"] = "xoshiro256** seeded by splitmix64";
  return env;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  return os;
}

void write_sidecar(const std::filesystem::path& path, const ExperimentConfig& cfg, json summary,
                   const std::vector<std::string>& files) {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["experiment"] = cfg.experiment;
  doc["config_hash"] = config_hash(cfg);
  doc["config"] = cfg;
  doc["environment"] = environment();
  doc["files"] = files;
  doc["csv_schema_version"] = kSchemaVersion;
  doc["summary"] = std::move(summary);
  auto os = open_out(path);
  os << doc.dump(2) << "\n";
}

void summarize(SummaryRow& row, const std::vector<double>& iters) {
  const auto k = static_cast<double>(row.per_trial.size());
  row.trials = row.per_trial.size();
  double mean = 0.0;
  for (double v : row.per_trial) mean += v;
  mean /= k;
  double var = 0.0;
  for (double v : row.per_trial) var += (v - mean) * (v - mean);
  var = row.per_trial.size() > 1 ? var / (k - 1.0) : 0.0;
  row.mean = mean;
  row.half_width = 1.96 * std::sqrt(var / k);
  double it = 0.0;
  for (double v : iters) it += v;
  row.mean_iters = iters.empty() ? 0.0 : it / static_cast<double>(iters.size());
}

json summary_json(const std::vector<SummaryRow>& rows, const char* metric) {
  json arr = json::array();
  for (const auto& r : rows) {
    json o;
    o["scheme"] = r.scheme;
    o["base"] = r.base;
    o["n_s"] = r.n_s;
    o["snr_db"] = snr_to_json(r.snr_db);
    o["trials"] = r.trials;
    o[metric] = r.mean;
    o["ci95_half_width"] = r.half_width;
    o["mean_iters"] = r.mean_iters;
    arr.push_back(std::move(o));
  }
  return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

std::size_t ExperimentConfig::rows() const {
  if (m != 0) return m;
  return static_cast<std::size_t>(std::llround(delta * static_cast<double>(n)));
}

MampConfig ExperimentConfig::mamp_config() const {
  MampConfig c;
  c.max_iters = max_iters;
  c.damping_window = damping_window;
  c.theta = parse_theta_schedule(theta_schedule);
  c.xi = parse_xi_schedule(xi_schedule);
  c.variance_floor = variance_floor;
  c.stop_tolerance = stop_tolerance;
  c.stall_patience = stall_patience;
  return c;
}

SourcePrior ExperimentConfig::source_prior() const {
  if (prior == "qpsk") return Qpsk{};
  return BernoulliGaussian{rho, sigma_s2};
}

void ExperimentConfig::validate() const {
  require(std::find(std::begin(kExperiments), std::end(kExperiments), experiment) != std::end(kExperiments),
          "experiment", "unknown experiment '" + experiment + "'");
  require(trials >= 1, "trials", "must be >= 1");
  require(threads >= 1, "threads", "must be >= 1");
  if (experiment == "selftest") return;
  require(pow2(n), "n", "must be a power of two");

  if (experiment == "complexity-table") {
    require(!table_block_sizes.empty(), "table_block_sizes", "must not be empty");
    for (auto b : table_block_sizes) require(pow2(b) && b <= n, "table_block_sizes", "entries must be powers of two <= n");
    require(complexity_p >= 0.0, "complexity_p", "must be >= 0");
    return;
  }

  require(prior == "bernoulli-gaussian" || prior == "qpsk", "prior", "must be bernoulli-gaussian or qpsk");
  try {
    validate_prior(source_prior());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config key 'rho'/'sigma_s2': ") + e.what());
  }
  require(!snr_db.empty(), "snr_db", "must not be empty");
  for (double s : snr_db) require(!std::isnan(s), "snr_db", "entries must be numbers");
  require(!bases.empty(), "bases", "must not be empty");
  for (const auto& b : bases) {
    try {
      (void)parse_base(b);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config key 'bases': ") + e.what());
    }
  }
  require(estimator == "mamp" || estimator == "oamp", "estimator", "must be mamp or oamp");
  require(mle_normalization == "blockwise" || mle_normalization == "global", "mle_normalization",
          "must be blockwise or global");
  try {
    mamp_config().validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("estimator keys: ") + e.what());
  }

  if (experiment == "cs-mse") {
    const std::size_t mm = rows();
    require(mm >= 1 && mm <= n, m != 0 ? "m" : "delta", "rows must lie in [1, n]");
    require(kappa >= 1.0, "kappa", "must be >= 1");
    require(!variants.empty(), "variants", "must not be empty");
    bool any_ibs = false;
    for (const auto& v : variants) {
      if (v == "full") continue;
      any_ibs = true;
      try {
        (void)parse_variant(v);
      } catch (const ConfigError& e) {
        throw ConfigError(std::string("config key 'variants': ") + e.what());
      }
    }
    if (any_ibs) {
      require(pow2(n_s) && n_s <= n, "n_s", "must be a power of two <= n");
      const std::size_t blocks = n / n_s;
      require(mm % blocks == 0 && mm / blocks <= n_s, "n_s", "rows must split evenly into n / n_s blocks of at most n_s rows");
    }
  }
  if (experiment == "ifdm-ber") {
    require(prior == "qpsk", "prior", "ifdm-ber needs the qpsk prior");
    require(!block_sizes.empty(), "block_sizes", "must not be empty");
    for (auto b : block_sizes) require(pow2(b) && b <= n, "block_sizes", "entries must be powers of two <= n");
    require(paths >= 1 && paths < n, "paths", "must lie in [1, n)");
    require(channel == "static" || channel == "jakes-4ghz-100kmh", "channel", "must be static or jakes-4ghz-100kmh");
    require(target_ber > 0.0 && target_ber < 0.5, "target_ber", "must lie in (0, 0.5)");
  }
}

void to_json(json& j, const ExperimentConfig& c) {
  json snr = json::array();
  for (double s : c.snr_db) snr.push_back(snr_to_json(s));
  j = json{{"experiment", c.experiment},
           {"seed", c.seed},
           {"trials", c.trials},
           {"threads", c.threads},
           {"output_path", c.output_path},
           {"n", c.n},
           {"n_s", c.n_s},
           {"m", c.m},
           {"delta", c.delta},
           {"kappa", c.kappa},
           {"snr_db", snr},
           {"prior", c.prior},
           {"rho", c.rho},
           {"sigma_s2", c.sigma_s2},
           {"variants", c.variants},
           {"bases", c.bases},
           {"estimator", c.estimator},
           {"max_iters", c.max_iters},
           {"damping_window", c.damping_window},
           {"theta_schedule", c.theta_schedule},
           {"xi_schedule", c.xi_schedule},
           {"mle_normalization", c.mle_normalization},
           {"variance_floor", c.variance_floor},
           {"stop_tolerance", c.stop_tolerance},
           {"stall_patience", c.stall_patience},
           {"block_sizes", c.block_sizes},
           {"paths", c.paths},
           {"channel", c.channel},
           {"target_ber", c.target_ber},
           {"table_block_sizes", c.table_block_sizes},
           {"complexity_p", c.complexity_p}};
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, val] : j.items()) {
    if (key == "experiment") read_key(val, "experiment", c.experiment);
    else if (key == "seed") read_key(val, "seed", c.seed);
    else if (key == "trials") read_key(val, "trials", c.trials);
    else if (key == "threads") read_key(val, "threads", c.threads);
    else if (key == "output_path") read_key(val, "output_path", c.output_path);
    else if (key == "n") read_key(val, "n", c.n);
    else if (key == "n_s") read_key(val, "n_s", c.n_s);
    else if (key == "m") read_key(val, "m", c.m);
    else if (key == "delta") read_key(val, "delta", c.delta);
    else if (key == "kappa") read_key(val, "kappa", c.kappa);
    else if (key == "snr_db") {
      c.snr_db.clear();
      try {
        if (val.is_array()) {
          for (const auto& s : val) c.snr_db.push_back(snr_from_json(s));
        } else {
          c.snr_db.push_back(snr_from_json(val));
        }
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config key 'snr_db': ") + e.what());
      }
    }
    else if (key == "prior") read_key(val, "prior", c.prior);
    else if (key == "rho") read_key(val, "rho", c.rho);
    else if (key == "sigma_s2") read_key(val, "sigma_s2", c.sigma_s2);
    else if (key == "variants") read_key(val, "variants", c.variants);
    else if (key == "bases") read_key(val, "bases", c.bases);
    else if (key == "estimator") read_key(val, "estimator", c.estimator);
    else if (key == "max_iters") read_key(val, "max_iters", c.max_iters);
    else if (key == "damping_window") read_key(val, "damping_window", c.damping_window);
    else if (key == "theta_schedule") read_key(val, "theta_schedule", c.theta_schedule);
    else if (key == "xi_schedule") read_key(val, "xi_schedule", c.xi_schedule);
    else if (key == "mle_normalization") read_key(val, "mle_normalization", c.mle_normalization);
    else if (key == "variance_floor") read_key(val, "variance_floor", c.variance_floor);
    else if (key == "stop_tolerance") read_key(val, "stop_tolerance", c.stop_tolerance);
    else if (key == "stall_patience") read_key(val, "stall_patience", c.stall_patience);
    else if (key == "block_sizes") read_key(val, "block_sizes", c.block_sizes);
    else if (key == "paths") read_key(val, "paths", c.paths);
    else if (key == "channel") read_key(val, "channel", c.channel);
    else if (key == "target_ber") read_key(val, "target_ber", c.target_ber);
    else if (key == "table_block_sizes") read_key(val, "table_block_sizes", c.table_block_sizes);
    else if (key == "complexity_p") read_key(val, "complexity_p", c.complexity_p);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

ExperimentConfig default_config(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "ifdm-ber") {
    c.n = 1024;
    c.prior = "qpsk";
    c.bases = {"FFT", "FWHT"};
    c.snr_db = {0, 2, 4, 6, 8, 10, 12};
    c.max_iters = 40;
    c.trials = 1;
  } else if (experiment == "complexity-table") {
    c.n = 4096;
  }
  return c;
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  std::string experiment = "cs-mse";
  if (j.contains("experiment")) read_key(j.at("experiment"), "experiment", experiment);
  ExperimentConfig c = default_config(experiment);
  from_json(j, c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& c) {
  json j = c;
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

std::uint64_t trial_seed(std::uint64_t master, std::size_t index) { return derive_seed(master, "trial", index); }

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& job) {
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, count));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          job(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(count);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Experiments

CsMseResult run_cs_mse(const ExperimentConfig& cfg_in, const std::filesystem::path& out_dir) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "cs-mse";
  cfg.validate();
  const std::size_t n = cfg.n;
  const std::size_t m = cfg.rows();
  const SensingDiagonal sd = gen_sensing_diagonal(m, n, cfg.kappa);
  const LinearOperator a = sd.op();
  const SourcePrior prior = cfg.source_prior();
  const MampConfig mc = cfg.mamp_config();
  const bool blockwise = cfg.mle_normalization == "blockwise";

  struct Scheme {
    std::string variant;
    TransformBase base;
  };
  std::vector<Scheme> schemes;
  for (const auto& b : cfg.bases) {
    for (const auto& v : cfg.variants) schemes.push_back({v, parse_base(b)});
  }
  const std::size_t ns = cfg.snr_db.size();
  const std::size_t nsch = schemes.size();
  // Slot layout: [trial][snr][scheme].
  std::vector<Trajectory> traj(cfg.trials * ns * nsch);

  parallel_for(cfg.trials, cfg.threads, [&](std::size_t k) {
    const std::uint64_t ts = trial_seed(cfg.seed, k);
    const CVec s = sample_source(prior, n, derive_seed(ts, "source"));
    for (std::size_t si = 0; si < ns; ++si) {
      for (std::size_t c = 0; c < nsch; ++c) {
        const Scheme& sch = schemes[c];
        LinearOperator xi = identity_operator(1);
        BlockPartition part;
        if (sch.variant == "full") {
          xi = build_full_transform(n, m, sch.base, TransformDirection::Kernel, derive_seed(ts, "full-perm"));
        } else {
          IbsSpec spec{n, cfg.n_s, m, parse_variant(sch.variant), sch.base, TransformDirection::Kernel,
                       derive_seed(ts, "block"), derive_seed(ts, "whole")};
          xi = build_ibs_transform(spec);
          if (blockwise) part = diagonal_block_partition(sd.singulars, ibs_row_blocks(spec));
        }
        const SystemInstance inst = simulate_observation(a, DiagonalStructure{sd.singulars}, xi, s, cfg.snr_db[si],
                                                         derive_seed(ts, "noise", si));
        traj[(k * ns + si) * nsch + c] = cfg.estimator == "mamp" ? run_cd_mamp(inst, xi, prior, mc, part)
                                                                 : run_cd_oamp(inst, xi, prior, mc, part);
      }
    }
  });

  CsMseResult result;
  result.config_hash = config_hash(cfg);
  for (std::size_t si = 0; si < ns; ++si) {
    for (std::size_t c = 0; c < nsch; ++c) {
      SummaryRow row;
      row.scheme = schemes[c].variant;
      row.base = to_string(schemes[c].base);
      row.n_s = schemes[c].variant == "full" ? n : cfg.n_s;
      row.snr_db = cfg.snr_db[si];
      std::vector<double> iters;
      for (std::size_t k = 0; k < cfg.trials; ++k) {
        const Trajectory& t = traj[(k * ns + si) * nsch + c];
        row.per_trial.push_back(t.final_mse());
        iters.push_back(static_cast<double>(t.records.size()));
      }
      summarize(row, iters);
      result.summary.push_back(std::move(row));
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      auto os = open_out(out_dir / "cs_mse_trajectories.csv");
      os << "scheme,base,snr_db,trial_seed,t,mse,mse_db,v_gamma,v_phi,flags\n";
      for (std::size_t si = 0; si < ns; ++si) {
        for (std::size_t c = 0; c < nsch; ++c) {
          for (std::size_t k = 0; k < cfg.trials; ++k) {
            std::ostringstream body;
            write_trajectory_csv(body, trial_seed(cfg.seed, k), traj[(k * ns + si) * nsch + c]);
            std::istringstream lines(body.str());
            std::string line;
            const std::string prefix = schemes[c].variant + "," + to_string(schemes[c].base) + "," + fmt(cfg.snr_db[si]) + ",";
            while (std::getline(lines, line)) os << prefix << line << "\n";
          }
        }
      }
    }
    {
      auto os = open_out(out_dir / "cs_mse_summary.csv");
      os << "scheme,base,n_s,snr_db,trials,mean_final_mse,mean_final_mse_db,ci95_half_width,mean_iters\n";
      for (const auto& r : result.summary) {
        os << r.scheme << "," << r.base << "," << r.n_s << "," << fmt(r.snr_db) << "," << r.trials << "," << fmt(r.mean)
           << "," << fmt(10.0 * std::log10(r.mean)) << "," << fmt(r.half_width) << "," << fmt(r.mean_iters) << "\n";
      }
    }
    write_sidecar(out_dir / "cs_mse.json", cfg, summary_json(result.summary, "mean_final_mse"),
                  {"cs_mse_trajectories.csv", "cs_mse_summary.csv"});
  }
  return result;
}

IfdmBerResult run_ifdm_ber(const ExperimentConfig& cfg_in, const std::filesystem::path& out_dir) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "ifdm-ber";
  cfg.validate();
  const std::size_t n = cfg.n;
  const SourcePrior prior = Qpsk{};
  const MampConfig mc = cfg.mamp_config();
  const bool time_varying = cfg.channel != "static";
  const double spread = time_varying ? kJakes4GHz100kmhSpread : 0.0;
  // At least 100 / target_ber symbols per point.
  const auto needed = static_cast<std::size_t>(std::ceil(100.0 / cfg.target_ber / static_cast<double>(n)));
  const std::size_t trials = std::max(cfg.trials, needed);

  struct Scheme {
    std::size_t n_s;
    TransformBase base;
    std::string name;
  };
  std::vector<Scheme> schemes;
  for (auto b : cfg.block_sizes) {
    for (const auto& bs : cfg.bases) {
      const TransformBase base = parse_base(bs);
      const bool full = b == n && base == TransformBase::FFT;
      schemes.push_back({b, base, full ? std::string("IFDM") : "IBS-" + bs});
    }
  }
  const std::size_t ns = cfg.snr_db.size();
  const std::size_t nsch = schemes.size();
  struct Cell {
    double ber = 0.0;
    std::size_t iters = 0;
  };
  std::vector<Cell> cells(trials * ns * nsch);

  parallel_for(trials, cfg.threads, [&](std::size_t k) {
    const std::uint64_t ts = trial_seed(cfg.seed, k);
    const CVec s = sample_source(prior, n, derive_seed(ts, "source"));
    const MultipathChannel ch = gen_multipath_channel(n, cfg.paths, spread, derive_seed(ts, "channel"));
    const LinearOperator a = ch.op();
    OperatorStructure structure = GeneralStructure{};
    if (!ch.time_varying()) structure = CirculantStructure{ch.circulant_column()};
    const SpectralProfile profile = spectral_profile(a, structure, 2 * mc.max_iters + 2, n);
    for (std::size_t c = 0; c < nsch; ++c) {
      const Scheme& sch = schemes[c];
      LinearOperator xi = identity_operator(1);
      if (sch.name == "IFDM") {
        xi = build_multicarrier(Ifdm{derive_seed(ts, "whole")}, n);
      } else {
        xi = build_ibs_transform(IbsSpec{n, sch.n_s, n, IbsVariant::BW_IBS, sch.base, TransformDirection::KernelAdjoint,
                                         derive_seed(ts, "block"), derive_seed(ts, "whole")});
      }
      for (std::size_t si = 0; si < ns; ++si) {
        const SystemInstance inst = simulate_observation(a, structure, xi, s, cfg.snr_db[si], derive_seed(ts, "noise", si));
        const Trajectory t = cfg.estimator == "mamp" ? run_cd_mamp(inst, xi, prior, mc, {}, &profile)
                                                     : run_cd_oamp(inst, xi, prior, mc);
        cells[(k * ns + si) * nsch + c] = {qpsk_ber(t.estimate, s), t.records.size()};
      }
    }
  });

  IfdmBerResult result;
  result.config_hash = config_hash(cfg);
  for (std::size_t si = 0; si < ns; ++si) {
    for (std::size_t c = 0; c < nsch; ++c) {
      SummaryRow row;
      row.scheme = schemes[c].name;
      row.base = to_string(schemes[c].base);
      row.n_s = schemes[c].n_s;
      row.snr_db = cfg.snr_db[si];
      std::vector<double> iters;
      for (std::size_t k = 0; k < trials; ++k) {
        const Cell& cell = cells[(k * ns + si) * nsch + c];
        row.per_trial.push_back(cell.ber);
        iters.push_back(static_cast<double>(cell.iters));
      }
      summarize(row, iters);
      result.summary.push_back(std::move(row));
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      auto os = open_out(out_dir / "ifdm_ber.csv");
      os << "scheme,base,n_s,snr_db,trials,symbols,ber,ci95_half_width,mean_iters\n";
      for (const auto& r : result.summary) {
        os << r.scheme << "," << r.base << "," << r.n_s << "," << fmt(r.snr_db) << "," << r.trials << ","
           << r.trials * n << "," << fmt(r.mean) << "," << fmt(r.half_width) << "," << fmt(r.mean_iters) << "\n";
      }
    }
    {
      auto os = open_out(out_dir / "ifdm_ber_trials.csv");
      os << "scheme,base,n_s,snr_db,trial_seed,ber,iters\n";
      for (std::size_t si = 0; si < ns; ++si) {
        for (std::size_t c = 0; c < nsch; ++c) {
          for (std::size_t k = 0; k < trials; ++k) {
            const Cell& cell = cells[(k * ns + si) * nsch + c];
            os << schemes[c].name << "," << to_string(schemes[c].base) << "," << schemes[c].n_s << ","
               << fmt(cfg.snr_db[si]) << "," << trial_seed(cfg.seed, k) << "," << fmt(cell.ber) << "," << cell.iters
               << "\n";
          }
        }
      }
    }
    write_sidecar(out_dir / "ifdm_ber.json", cfg, summary_json(result.summary, "ber"),
                  {"ifdm_ber.csv", "ifdm_ber_trials.csv"});
  }
  return result;
}

std::vector<ComplexityRow> run_complexity_table(const ExperimentConfig& cfg_in, const std::filesystem::path& out_dir) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "complexity-table";
  cfg.validate();
  std::vector<ComplexityRow> rows;
  for (auto b : cfg.table_block_sizes) {
    const RelativeComplexity rc = relative_complexity(cfg.n, b, cfg.complexity_p);
    rows.push_back({b, 100.0 * rc.theta_ibs, 100.0 * rc.overall});
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    {
      auto os = open_out(out_dir / "complexity.csv");
      os << "n,n_s,p,theta_pct,overall_pct\n";
      for (const auto& r : rows) {
        os << cfg.n << "," << r.n_s << "," << fmt(cfg.complexity_p) << "," << fmt_fixed(r.theta_pct, 4) << ","
           << fmt_fixed(r.overall_pct, 4) << "\n";
      }
    }
    json arr = json::array();
    for (const auto& r : rows) arr.push_back({{"n_s", r.n_s}, {"theta_pct", r.theta_pct}, {"overall_pct", r.overall_pct}});
    write_sidecar(out_dir / "complexity.json", cfg, arr, {"complexity.csv"});
  }
  return rows;
}

}  // namespace ibs
