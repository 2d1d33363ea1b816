#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ibs/errors.hpp"
#include "ibs/harness.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> threads;
  std::vector<std::string> overrides;  // key=json-value
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("-c,--config", f.config, "JSON experiment config")->check(CLI::ExistingFile);
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("-o,--out", f.out, "output directory");
  cmd->add_option("--trials", f.trials, "Monte Carlo trials");
  cmd->add_option("--threads", f.threads, "worker threads");
  cmd->add_option("--set", f.overrides, "override a top-level key, e.g. --set n=4096 or --set 'snr_db=[10,20]'");
}

ibs::ExperimentConfig resolve(const std::string& experiment, const CommonFlags& f) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  if (!f.config.empty()) {
    std::ifstream is(f.config);
    std::stringstream text;
    text << is.rdbuf();
    try {
      doc = nlohmann::ordered_json::parse(text.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ibs::ConfigError(f.config + ": " + e.what());
    }
    if (!doc.is_object()) throw ibs::ConfigError(f.config + ": config must be a JSON object");
    if (doc.contains("experiment") && doc["experiment"] != experiment) {
      throw ibs::ConfigError(f.config + ": config is for experiment " + doc["experiment"].dump() + ", not '" +
                             experiment + "'");
    }
  }
  for (const auto& kv : f.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ibs::ConfigError("--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string text = kv.substr(eq + 1);
    auto parsed = nlohmann::ordered_json::parse(text, nullptr, false);
    doc[key] = parsed.is_discarded() ? nlohmann::ordered_json(text) : parsed;
  }
  if (f.seed) doc["seed"] = *f.seed;
  if (f.out) doc["output_path"] = *f.out;
  if (f.trials) doc["trials"] = *f.trials;
  if (f.threads) doc["threads"] = *f.threads;
  doc["experiment"] = experiment;
  ibs::ExperimentConfig cfg = ibs::parse_config(doc.dump());
  cfg.validate();
  return cfg;
}

void print_summary(const std::vector<ibs::SummaryRow>& rows, const char* metric) {
  for (const auto& r : rows) {
    std::cout << r.scheme << " " << r.base << " n_s=" << r.n_s << " snr=" << r.snr_db << "dB " << metric << "="
              << r.mean << " +-" << r.half_width << " iters=" << r.mean_iters << " (" << r.trials << " trials)\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IBS transforms with cross-domain memory AMP: experiments and self-test"};
  app.require_subcommand(1);

  CommonFlags cs_flags;
  CommonFlags ber_flags;
  CommonFlags cx_flags;
  auto* cs = app.add_subcommand("cs-mse", "compressed sensing mse trajectories per IBS variant");
  auto* ber = app.add_subcommand("ifdm-ber", "BER sweep of IFDM and IBS-IFDM");
  auto* cx = app.add_subcommand("complexity", "relative complexity table");
  auto* st = app.add_subcommand("selftest", "invariant suite at small sizes");
  add_common(cs, cs_flags);
  add_common(ber, ber_flags);
  add_common(cx, cx_flags);
  bool inject = false;
  std::uint64_t st_seed = 7;
  st->add_flag("--inject-nle-sign-error", inject, "mutation canary: flip the NLE extrinsic sign");
  st->add_option("--seed", st_seed, "seed for the random checks");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*cs) {
      const auto cfg = resolve("cs-mse", cs_flags);
      const auto res = ibs::run_cs_mse(cfg, cfg.output_path);
      print_summary(res.summary, "mse");
      std::cout << "config hash " << res.config_hash << ", results in " << cfg.output_path << "\n";
    } else if (*ber) {
      const auto cfg = resolve("ifdm-ber", ber_flags);
      const auto res = ibs::run_ifdm_ber(cfg, cfg.output_path);
      print_summary(res.summary, "ber");
      std::cout << "config hash " << res.config_hash << ", results in " << cfg.output_path << "\n";
    } else if (*cx) {
      const auto cfg = resolve("complexity-table", cx_flags);
      for (const auto& r : ibs::run_complexity_table(cfg, cfg.output_path)) {
        std::cout << "n_s=" << r.n_s << " theta=" << r.theta_pct << "% overall=" << r.overall_pct << "%\n";
      }
    } else if (*st) {
      return ibs::run_selftest(std::cout, {inject, st_seed}) ? 0 : 1;
    }
  } catch (const ibs::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
