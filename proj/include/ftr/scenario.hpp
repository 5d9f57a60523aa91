#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ftr/equilibrium.hpp"

namespace ftr {

struct PlayerDef {
  int id = 0;      ///< reporting label
  int gen_id = 0;  ///< generator the player owns
};

struct ScenarioSettings {
  std::vector<int> path_lines;     ///< monitored lines, in table order
  std::vector<PlayerDef> players;
  double deviation_fraction = 0.10;
  double omega_plus = 0.5;
  SolveOptions solver;
  double rho_obl_base = 0.0;
  unsigned seed = 1;               ///< recorded for reproducibility audits
  std::string output_dir = "out";
};

struct Scenario {
  NetworkModel net;
  ScenarioSettings settings;
};

/// Parse a full scenario document: network plus paths, players, deviation
/// model and solver options. See the README for the schema.
Scenario load_scenario(const nlohmann::json& doc);
Scenario load_scenario_file(const std::string& path);

/// One protocol state (everyone obligation / everyone option).
struct StateResult {
  FtrType type = FtrType::obligation;
  EquilibriumSolution solution;
  Eigen::MatrixXd bids;     ///< players x paths, zero where no offer
  Eigen::MatrixXd awards;
  Eigen::MatrixXd profits;  ///< realized risk-adjusted profit per pair
  Eigen::VectorXd mcp_dual;        ///< per path: impact-weighted line duals
  Eigen::VectorXd mcp_award_avg;   ///< per path: award-weighted accepted bid
};

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunReport {
  std::vector<int> path_line_ids;
  std::vector<int> player_ids;

  DispatchEstimate base_dispatch;
  std::vector<RiskMetrics> risk;                           ///< per path
  std::vector<std::vector<ContributionMetrics>> contrib;   ///< [player][path]

  KktSystem system;
  StateResult state_obligation;
  StateResult state_option;

  /// Chosen instrument per (player, path); -1 none, else FtrType value.
  Eigen::MatrixXi chosen_type;

  EquilibriumSolution kkt_solution;    ///< joint single-level solve
  EquilibriumSolution final_solution;  ///< best-response fixed point
  double route_gap = 0.0;              ///< objective gap between the two routes
  NashReport nash;

  std::vector<StageTiming> timings;
  bool fully_converged = true;
};

/// Full experiment protocol: base dispatch, risk and contribution metrics,
/// the two all-obligation / all-option states, type selection, the joint
/// KKT solve, the best-response fixed point, and the Nash certificate.
RunReport run_scenario(const Scenario& scenario);

/// Metrics-only prefix of the pipeline (tables 1-2 and the bounds).
RunReport run_metrics_only(const Scenario& scenario);

/// Serialize the final solution so `verify` can re-check it later.
nlohmann::json solution_to_json(const RunReport& report);

/// Re-run the Nash certificate against a saved solution document.
NashReport verify_saved_solution(const Scenario& scenario, const nlohmann::json& doc,
                                 const std::optional<int>& grid_override = std::nullopt,
                                 const std::optional<double>& eps_override = std::nullopt);

}  // namespace ftr
