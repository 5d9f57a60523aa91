#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include <json.hpp>

namespace ftr {

struct Line {
  int id = 0;
  int from = 0;  ///< bus id
  int to = 0;    ///< bus id
  double reactance = 0.0;  ///< p.u., nonzero
  double capacity = 0.0;   ///< MW, strictly positive
};

struct Generator {
  int id = 0;
  int bus = 0;
  double cost = 0.0;   ///< marginal cost, currency/MWh (single segment)
  double p_min = 0.0;  ///< MW
  double p_max = 0.0;  ///< MW
};

struct Load {
  int id = 0;
  int bus = 0;
  double demand = 0.0;  ///< nominal MW
};

/// DC network: buses, lines, generators, loads and the slack bus. Immutable
/// after construction; all factor computations are pure functions of it.
class NetworkModel {
public:
  NetworkModel(std::vector<int> buses, std::vector<Line> lines,
               std::vector<Generator> generators, std::vector<Load> loads, int slack_bus);

  int bus_count() const { return static_cast<int>(buses_.size()); }
  int line_count() const { return static_cast<int>(lines_.size()); }
  int generator_count() const { return static_cast<int>(generators_.size()); }
  int load_count() const { return static_cast<int>(loads_.size()); }

  const std::vector<int>& buses() const { return buses_; }
  const std::vector<Line>& lines() const { return lines_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Load>& loads() const { return loads_; }

  int slack_bus() const { return slack_bus_; }        ///< bus id
  int slack_bus_index() const { return slack_index_; }

  int bus_index(int bus_id) const;   ///< TopologyError if unknown
  int line_index(int line_id) const;
  int generator_index(int gen_id) const;
  int load_index(int load_id) const;

  Eigen::VectorXd nominal_demand() const;  ///< per load, MW

private:
  void validate() const;

  std::vector<int> buses_;
  std::vector<Line> lines_;
  std::vector<Generator> generators_;
  std::vector<Load> loads_;
  int slack_bus_ = 0;
  int slack_index_ = 0;
};

/// Parse and validate a scenario network document (see README for the
/// schema). Throws SchemaError for malformed documents and TopologyError for
/// dangling references or a disconnected graph.
NetworkModel build_network(const nlohmann::json& doc);

/// Injection sensitivities of line flows. shift(l, b) is the MW flow change
/// on line l per MW injected at bus b and withdrawn at the slack; the slack
/// column is identically zero. dist/slack_factor are dispatch-dependent and
/// filled by compute_distribution_factors.
struct SensitivityMatrices {
  Eigen::MatrixXd shift;         ///< lines x buses
  Eigen::MatrixXd dist;          ///< lines x generators, D = D_sl + A
  Eigen::VectorXd slack_factor;  ///< per line, D_sl
  bool has_distribution = false;
};

SensitivityMatrices compute_shift_factors(const NetworkModel& net);

/// PTDF of a src->sink transfer on a line: shift column difference.
double ptdf(const SensitivityMatrices& sens, int line_idx, int src_bus_idx, int sink_bus_idx);

struct DispatchEstimate {
  Eigen::VectorXd gen_output;   ///< MW per generator
  Eigen::VectorXd line_flow;    ///< MW per line, signed from->to
  Eigen::VectorXd nodal_price;  ///< currency/MWh per bus
  double total_cost = 0.0;
  bool degenerate = false;      ///< LP optimum had alternate bases
};

/// Cost-minimal DC dispatch for the given per-load demand. Nodal prices are
/// the duals of the bus balance rows. Throws InfeasibleDispatchError or
/// UnboundedError.
DispatchEstimate run_dcopf(const NetworkModel& net, const Eigen::VectorXd& demand);

/// A monitored FTR path: a line with an orientation. sign = +1 keeps the
/// line's from->to direction, -1 reverses it; source/sink follow the sign.
struct Path {
  int line_idx = 0;
  double sign = 1.0;
  int source_bus_idx = 0;
  int sink_bus_idx = 0;
};

Path make_path(const NetworkModel& net, int line_idx, double sign);

/// lambda_sink - lambda_source; positive spread rewards a source->sink FTR.
double path_spread(const DispatchEstimate& dispatch, const Path& path);

/// Base-case flow along the path orientation (>= 0 for flow-oriented paths).
double path_flow(const DispatchEstimate& dispatch, const Path& path);

/// Share of total dispatch a line's flow attributes to the slack:
/// (p_l - sum_{i != sl} A_{l,i} p_i) / sum_i p_i. Throws ZeroDispatchError
/// when total output is not positive.
double slack_distribution_factor(const NetworkModel& net, const SensitivityMatrices& sens,
                                 const DispatchEstimate& dispatch, int line_idx);

/// Incremental slack-factor update after generator j moves by delta_p to
/// supply load d. Uses the closed uncapped form when the incremental flow
/// stays under the line limit and the capped form otherwise.
double update_slack_factor(const NetworkModel& net, const SensitivityMatrices& sens,
                           const DispatchEstimate& dispatch, int line_idx, int gen_idx,
                           int load_idx, double delta_p);

/// Generation distribution factor D_{l,i} = D_{l,sl} + A_{l,i}.
double distribution_factor(const NetworkModel& net, const SensitivityMatrices& sens,
                           const DispatchEstimate& dispatch, int gen_idx, int line_idx);

/// Fill sens.dist and sens.slack_factor for the given dispatch.
void compute_distribution_factors(const NetworkModel& net, SensitivityMatrices& sens,
                                  const DispatchEstimate& dispatch);

}  // namespace ftr
