#pragma once

#include <Eigen/Dense>

#include "ftr/network.hpp"

namespace ftr {

/// Two-point load deviation model: each load moves by +-delta with
/// probabilities omega_plus / omega_minus that sum to one.
struct LoadDeviationModel {
  Eigen::VectorXd delta;        ///< MW deviation magnitude per load, >= 0
  Eigen::VectorXd omega_plus;   ///< increment probability per load
  Eigen::VectorXd omega_minus;  ///< decrement probability per load
};

/// Default model: deviation = fraction * nominal demand, symmetric odds.
LoadDeviationModel make_load_deviation_model(const NetworkModel& net, double fraction = 0.10,
                                             double omega_plus = 0.5);

/// Generator output changes when one load moves up or down by its deviation,
/// from full dispatch re-solves (line limits respected at the perturbed
/// points). up sums to +delta, down sums to -delta.
struct RedispatchResponse {
  Eigen::VectorXd up;    ///< per generator, MW
  Eigen::VectorXd down;  ///< per generator, MW
};

RedispatchResponse redispatch_response(const NetworkModel& net, const DispatchEstimate& base,
                                       int load_idx, double delta_d);

/// Responses for every load, computed once and shared across paths/players.
struct FleetResponse {
  Eigen::MatrixXd up;    ///< generators x loads
  Eigen::MatrixXd down;  ///< generators x loads
};

FleetResponse compute_fleet_response(const NetworkModel& net, const DispatchEstimate& base,
                                     const LoadDeviationModel& model);

/// psi: line-flow sensitivity to generator j dispatching against load d,
/// A_{l,j} - A_{l,d} (the j->d PTDF on the line).
double line_sensitivity(const NetworkModel& net, const SensitivityMatrices& sens, int gen_idx,
                        int load_idx, int line_idx);

/// Probability-weighted flow effects of one load's up/down moves.
struct LoadEffectTerms {
  double l1 = 0.0;  ///< increment term, MW
  double l2 = 0.0;  ///< decrement term, MW
};

LoadEffectTerms load_effect_terms(const Eigen::VectorXd& psi, const Eigen::VectorXd& resp_up,
                                  const Eigen::VectorXd& resp_down, double omega_plus,
                                  double omega_minus);

/// Diagnostic expected effect for a single (j, d) pair under a plain
/// probability weight; superseded by the worst-case pipeline below.
double expected_line_effect(double psi, double delta_d, double weight);

struct WeightVector {
  Eigen::VectorXd w;
  bool fallback = false;  ///< adverse terms all zero, uniform weights used
};

/// Worst-case load weights: adverse-signed parts of (l1, l2), normalized.
/// For p_est >= 0 the adverse parts are the negative ones, otherwise the
/// positive ones. With no adverse mass: uniform fallback, or
/// DegenerateWeightsError when strict.
WeightVector worst_case_weights(const Eigen::VectorXd& l1, const Eigen::VectorXd& l2,
                                double p_est, bool strict = false);

/// Sign-partitioned sums of the weighted per-load effects phi.
struct PotentialFlows {
  double forward = 0.0;  ///< FPF >= 0
  double reverse = 0.0;  ///< RPF <= 0, stored signed
};

PotentialFlows potential_flows(const Eigen::VectorXd& phi);

struct ChanceCoefficients {
  double forward = 0.0;  ///< probability flow keeps its direction
  double reverse = 0.0;  ///< probability of reversal; sums to one
};

/// Throws DegenerateChanceError when FPF + p_est + |RPF| is not positive.
ChanceCoefficients chance_coefficients(double p_est, double fpf, double rpf);

struct BidCaps {
  double obligation = 0.0;  ///< (2 zeta_f - 1) * spread
  double option = 0.0;      ///< zeta_f * spread
};

BidCaps bid_caps(double zeta_f, double spread);

/// Expected rent of an (obligation, option) bid pair at given quantities.
double decision_function(double zeta_f, double spread, double pi_obl, double pi_opt,
                         double q_obl, double q_opt);

/// Full per-path risk pipeline output.
struct RiskMetrics {
  Path path;
  double p_est = 0.0;   ///< oriented base flow, MW
  double spread = 0.0;  ///< lambda_sink - lambda_source
  Eigen::VectorXd l1;   ///< per load
  Eigen::VectorXd l2;
  Eigen::VectorXd w;
  Eigen::VectorXd phi;
  double fpf = 0.0;
  double rpf = 0.0;
  double zeta_f = 0.0;
  double zeta_r = 0.0;
  BidCaps caps;
  bool weight_fallback = false;
};

RiskMetrics compute_risk_metrics(const NetworkModel& net, const SensitivityMatrices& sens,
                                 const DispatchEstimate& dispatch, const FleetResponse& resp,
                                 const LoadDeviationModel& model, const Path& path);

}  // namespace ftr
