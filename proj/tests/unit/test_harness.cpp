#include <atomic>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "ibs/errors.hpp"
#include "ibs/harness.hpp"

using namespace ibs;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ibsmamp_unit_" + name);
  fs::remove_all(p);
  return p;
}

ExperimentConfig small_cs() {
  ExperimentConfig c = default_config("cs-mse");
  c.n = 512;
  c.n_s = 64;
  c.trials = 2;
  c.max_iters = 12;
  c.snr_db = {20.0, 30.0};
  return c;
}

}  // namespace

TEST_CASE("config round trip") {
  for (const char* e : {"cs-mse", "ifdm-ber", "complexity-table", "selftest"}) {
    ExperimentConfig c = default_config(e);
    c.snr_db = {0.0, std::numeric_limits<double>::infinity()};
    const std::string text = nlohmann::ordered_json(c).dump();
    const ExperimentConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(nlohmann::ordered_json(back).dump() == text);
  }
}

TEST_CASE("config parsing rejects bad input") {
  CHECK_THROWS_AS(parse_config(R"({"experiment":"cs-mse","colour":1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"n":"big"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1,2]"), ConfigError);
  try {
    parse_config("{\n  \"n\": 4,\n  \"n_s\": ,\n}");
    FAIL("expected a parse error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  try {
    parse_config(R"({"n": 1000})").validate();
    FAIL("expected a validation error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'n'") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(R"({"experiment":"cs-mse","variants":["ZZ"]})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"experiment":"cs-mse","n_s":48})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"experiment":"ifdm-ber","prior":"bernoulli-gaussian"})").validate(), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"experiment":"nope"})").validate(), ConfigError);
}

TEST_CASE("partial configs overlay the experiment defaults") {
  const ExperimentConfig c = parse_config(R"({"experiment":"ifdm-ber","snr_db":"inf"})");
  CHECK(c.n == 1024);
  CHECK(c.prior == "qpsk");
  REQUIRE(c.snr_db.size() == 1);
  CHECK(std::isinf(c.snr_db[0]));
  const ExperimentConfig d = parse_config(R"({"seed": 9, "snr_db": 25})");
  CHECK(d.experiment == "cs-mse");
  CHECK(d.n == 8192);
  CHECK(d.seed == 9);
  CHECK(d.snr_db == std::vector<double>{25.0});
}

TEST_CASE("config hash tracks content") {
  ExperimentConfig a = small_cs();
  ExperimentConfig b = small_cs();
  CHECK(config_hash(a) == config_hash(b));
  CHECK(config_hash(a).size() == 16);
  b.seed = 2;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("parallel_for covers every index and rethrows") {
  std::vector<int> hit(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { hit[i] += 1; });
  for (int h : hit) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(50, 3,
                               [](std::size_t i) {
                                 if (i == 17) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}

TEST_CASE("cs-mse output is byte-identical across runs and thread counts") {
  ExperimentConfig c = small_cs();
  const fs::path d1 = scratch("cs1");
  const fs::path d2 = scratch("cs2");
  const CsMseResult r1 = run_cs_mse(c, d1);
  c.threads = 2;
  const CsMseResult r2 = run_cs_mse(c, d2);
  CHECK(slurp(d1 / "cs_mse_trajectories.csv") == slurp(d2 / "cs_mse_trajectories.csv"));
  CHECK(slurp(d1 / "cs_mse_summary.csv") == slurp(d2 / "cs_mse_summary.csv"));
  CHECK(r1.summary.size() == 2 * 5);

  const std::string traj = slurp(d1 / "cs_mse_trajectories.csv");
  CHECK(traj.rfind("scheme,base,snr_db,trial_seed,t,mse,mse_db,v_gamma,v_phi,flags\n", 0) == 0);
  const auto side = nlohmann::ordered_json::parse(slurp(d1 / "cs_mse.json"));
  CHECK(side.at("schema_version") == kSchemaVersion);
  CHECK(side.at("config_hash") == r1.config_hash);
  // The embedded config reproduces the run.
  ExperimentConfig again = side.at("config").get<ExperimentConfig>();
  CHECK(config_hash(again) == r1.config_hash);
  const fs::path d3 = scratch("cs3");
  run_cs_mse(again, d3);
  CHECK(slurp(d1 / "cs_mse_trajectories.csv") == slurp(d3 / "cs_mse_trajectories.csv"));
  for (const auto& d : {d1, d2, d3}) fs::remove_all(d);
}

TEST_CASE("ifdm-ber noiseless preset gives zero errors") {
  ExperimentConfig c = default_config("ifdm-ber");
  c.n = 256;
  c.block_sizes = {256, 32};
  c.snr_db = {std::numeric_limits<double>::infinity()};
  c.target_ber = 0.4;
  c.trials = 2;
  c.max_iters = 10;
  const IfdmBerResult r = run_ifdm_ber(c, {});
  CHECK(r.summary.size() == 4);
  for (const auto& row : r.summary) CHECK(row.mean == 0.0);
  CHECK(r.summary[0].scheme == "IFDM");
}

TEST_CASE("ifdm-ber raises the trial count to the symbol budget") {
  ExperimentConfig c = default_config("ifdm-ber");
  c.n = 128;
  c.block_sizes = {32};
  c.bases = {"FFT"};
  c.snr_db = {10.0};
  c.target_ber = 0.05;  // 100 / 0.05 = 2000 symbols -> 16 trials of 128
  c.trials = 1;
  c.max_iters = 8;
  const fs::path d = scratch("ber");
  const IfdmBerResult r = run_ifdm_ber(c, d);
  CHECK(r.summary.front().trials == 16);
  CHECK(slurp(d / "ifdm_ber.csv").rfind("scheme,base,n_s,snr_db,trials,symbols,ber,ci95_half_width,mean_iters\n", 0) == 0);
  fs::remove_all(d);

  c.channel = "jakes-4ghz-100kmh";
  c.target_ber = 0.4;
  CHECK_NOTHROW(run_ifdm_ber(c, {}));
}

TEST_CASE("complexity table output") {
  ExperimentConfig c = default_config("complexity-table");
  const fs::path d = scratch("cx");
  const auto rows = run_complexity_table(c, d);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].theta_pct == doctest::Approx(58.33).epsilon(1e-3));
  CHECK(slurp(d / "complexity.csv") ==
        "n,n_s,p,theta_pct,overall_pct\n"
        "4096,128,8,58.3333,69.6970\n"
        "4096,32,8,41.6667,57.5758\n"
        "4096,8,8,25.0000,45.4545\n"
        "4096,4,8,16.6667,39.3939\n");
  fs::remove_all(d);
}

TEST_CASE("selftest passes and the sign canary trips it") {
  std::ostringstream ok;
  CHECK(run_selftest(ok, {}));
  CHECK(ok.str().find("FAIL") == std::string::npos);
  CHECK(ok.str().find("relative complexity") != std::string::npos);
  std::ostringstream bad;
  CHECK_FALSE(run_selftest(bad, {true, 7}));
  CHECK(bad.str().find("[FAIL] nle error orthogonality") != std::string::npos);
}
