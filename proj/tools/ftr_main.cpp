// Command-line driver: scenario runs, metrics-only runs, standalone auction
// clears, and Nash re-verification of saved solutions.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "ftr/clearing.hpp"
#include "ftr/errors.hpp"
#include "ftr/report.hpp"
#include "ftr/scenario.hpp"

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNoConvergence = 2, kInternalError = 3 };

int log_level() {
  const char* env = std::getenv("FTR_LOG_LEVEL");
  if (!env) return 1;
  const std::string s = env;
  if (s == "error") return 0;
  if (s == "warn") return 1;
  if (s == "info") return 2;
  if (s == "debug") return 3;
  return 1;
}

void info(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[ftr] " << msg << "\n";
}

std::string resolve_outdir(const std::string& flag_value, const std::string& config_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("FTR_OUTPUT_DIR")) return env;
  return config_value;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ftr::IoError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ftr::SchemaError(std::string(path) + " is not valid JSON: " + e.what());
  }
  return doc;
}

struct CommonOpts {
  std::string config;
  std::string out;
  std::optional<unsigned> seed;
  std::optional<double> epsilon;
  std::optional<int> grid;
  std::optional<int> max_rounds;
};

ftr::Scenario load_with_overrides(const CommonOpts& c) {
  ftr::Scenario sc = ftr::load_scenario_file(c.config);
  if (c.seed) sc.settings.seed = *c.seed;
  if (c.epsilon) sc.settings.solver.epsilon = *c.epsilon;
  if (c.grid) sc.settings.solver.grid_points = *c.grid;
  if (c.max_rounds) sc.settings.solver.max_rounds = *c.max_rounds;
  return sc;
}

int cmd_run(const CommonOpts& c) {
  ftr::Scenario sc = load_with_overrides(c);
  const std::string dir = resolve_outdir(c.out, sc.settings.output_dir);
  info("running scenario from " + c.config);
  ftr::RunReport report = ftr::run_scenario(sc);
  ftr::emit_tables(report, dir);
  info("tables written to " + dir);
  if (!report.fully_converged) {
    std::cerr << "[ftr] warning: solver did not fully converge or certify; results written\n";
    return kNoConvergence;
  }
  return kOk;
}

int cmd_metrics(const CommonOpts& c) {
  ftr::Scenario sc = load_with_overrides(c);
  const std::string dir = resolve_outdir(c.out, sc.settings.output_dir);
  ftr::RunReport report = ftr::run_metrics_only(sc);
  ftr::emit_metric_tables(report, dir);
  info("metric tables written to " + dir);
  return kOk;
}

int cmd_clear(const std::string& instance_path, const std::string& out_path) {
  ftr::ClearingInstance inst = ftr::parse_clearing_instance(read_json_file(instance_path));
  ftr::ClearingOutcome outcome = ftr::clear_market(inst);
  nlohmann::json doc = ftr::to_json(outcome, inst);
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    std::ofstream out(out_path);
    if (!out) throw ftr::IoError("cannot open " + out_path);
    out << doc.dump(2) << "\n";
  }
  return kOk;
}

int cmd_verify(const CommonOpts& c, const std::string& solution_path) {
  ftr::Scenario sc = load_with_overrides(c);
  ftr::NashReport report = ftr::verify_saved_solution(
      sc, read_json_file(solution_path),
      c.grid ? std::optional<int>(*c.grid) : std::nullopt,
      c.epsilon ? std::optional<double>(*c.epsilon) : std::nullopt);
  std::cout << "deviations_checked " << report.deviations_checked << "\n"
            << "max_improvement " << report.max_improvement << "\n"
            << "certified " << (report.certified ? "yes" : "no") << "\n";
  return report.certified ? kOk : kNoConvergence;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Risk-adjusted FTR bidding strategies and auction equilibria"};
  app.require_subcommand(1);

  CommonOpts common;
  std::string instance_path, solution_path, clear_out;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config,-c", common.config, "scenario document (JSON)")->required();
    cmd->add_option("--out,-o", common.out, "output directory (overrides config/env)");
    cmd->add_option("--seed", [&](const std::vector<std::string>& v) {
      common.seed = static_cast<unsigned>(std::stoul(v[0]));
      return true;
    }, "seed recorded in outputs");
    cmd->add_option("--epsilon", [&](const std::vector<std::string>& v) {
      common.epsilon = std::stod(v[0]);
      return true;
    }, "convergence / Nash tolerance override");
    cmd->add_option("--grid", [&](const std::vector<std::string>& v) {
      common.grid = std::stoi(v[0]);
      return true;
    }, "bid/quantity grid resolution override");
    cmd->add_option("--max-rounds", [&](const std::vector<std::string>& v) {
      common.max_rounds = std::stoi(v[0]);
      return true;
    }, "best-response round budget override");
  };

  CLI::App* run = app.add_subcommand("run", "full pipeline with tables and Nash certificate");
  add_common(run, true);
  CLI::App* metrics = app.add_subcommand("metrics", "risk and contribution tables only");
  add_common(metrics, true);
  CLI::App* clear = app.add_subcommand("clear", "solve one auction clearing instance");
  clear->add_option("--instance,-i", instance_path, "clearing instance (JSON)")->required();
  clear->add_option("--out,-o", clear_out, "outcome file (stdout when omitted)");
  CLI::App* verify = app.add_subcommand("verify", "Nash-check a saved solution");
  add_common(verify, true);
  verify->add_option("--solution,-s", solution_path, "solution document (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(common);
    if (metrics->parsed()) return cmd_metrics(common);
    if (clear->parsed()) return cmd_clear(instance_path, clear_out);
    if (verify->parsed()) return cmd_verify(common, solution_path);
  } catch (const ftr::SchemaError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ftr::TopologyError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ftr::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kConfigError;
  } catch (const ftr::InfeasibleInstanceError& e) {
    std::cerr << "infeasible instance: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}
