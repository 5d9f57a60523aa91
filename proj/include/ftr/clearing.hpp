#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

#include "ftr/network.hpp"

namespace ftr {

enum class FtrType { obligation, option };

const char* to_string(FtrType t);
FtrType ftr_type_from_string(const std::string& s);

struct Offer {
  int player = 0;  ///< player label
  int path = 0;    ///< index into the instance's path list
  FtrType type = FtrType::obligation;
  double price = 0.0;  ///< bid, currency/MWh
  double q_min = 0.0;  ///< MW
  double q_max = 0.0;  ///< MW
};

/// Auction input: offers plus their flow impact per monitored line. Options
/// enter a line constraint only through the positive part of their impact
/// (counter-flow from an option never relieves a limit).
struct ClearingInstance {
  std::vector<Offer> offers;
  Eigen::MatrixXd impact;    ///< offers x lines, signed source->sink PTDF
  Eigen::VectorXd line_cap;  ///< MW per line
  std::vector<int> line_ids; ///< labels for reporting
};

/// Impact coefficients per (path, line): PTDF of the path's source->sink
/// injection on each line.
Eigen::MatrixXd build_impact_coefficients(const NetworkModel& net,
                                          const SensitivityMatrices& sens,
                                          const std::vector<Path>& paths);

struct ClearingOutcome {
  Eigen::VectorXd award;  ///< MW per offer
  double objective = 0.0; ///< cleared bid revenue
  Eigen::VectorXd mu_line;     ///< signed net line dual (forward-congestion positive)
  Eigen::VectorXd mu_line_up;  ///< >= 0, forward limit
  Eigen::VectorXd mu_line_lo;  ///< >= 0, reverse limit
  Eigen::VectorXd mu_plus;     ///< >= 0 per offer, upper quantity bound
  Eigen::VectorXd mu_minus;    ///< >= 0 per offer, lower quantity bound
  std::vector<bool> binding;   ///< per line
  bool degenerate = false;
};

/// Revenue-maximizing awards subject to the simultaneous-feasibility line
/// constraints. Deterministic pivot order, so reruns reproduce the same
/// awards on degenerate optima. Throws InfeasibleInstanceError when the
/// minimum quantities cannot be carried, SolverError otherwise.
ClearingOutcome clear_market(const ClearingInstance& instance);

ClearingInstance parse_clearing_instance(const nlohmann::json& doc);
nlohmann::json to_json(const ClearingInstance& instance);
nlohmann::json to_json(const ClearingOutcome& outcome, const ClearingInstance& instance);

}  // namespace ftr
