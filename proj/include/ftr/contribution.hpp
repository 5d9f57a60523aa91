#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ftr/network.hpp"
#include "ftr/risk.hpp"

namespace ftr {

/// Player i's estimated share of the path flow: D_{l,i} * p_i along the
/// path orientation.
double player_share(const NetworkModel& net, const SensitivityMatrices& sens,
                    const DispatchEstimate& dispatch, int gen_idx, const Path& path);

/// Share sensitivity of player i to generator j redispatching delta_p toward
/// load d, via the incremental slack-factor update:
/// (D_sl' - D_sl) / delta_p * p_i. Requires i != j (the independence
/// assumption behind the finite-difference form) and delta_p != 0.
double share_sensitivity(const NetworkModel& net, const SensitivityMatrices& sens,
                         const DispatchEstimate& dispatch, int player_gen_idx, int other_gen_idx,
                         int load_idx, const Path& path, double delta_p);

/// Probability-weighted share changes for one (j, d) pair.
struct ShareChangeTerms {
  double chi1 = 0.0;  ///< omega+ * eta * dP+
  double chi2 = 0.0;  ///< omega- * eta * dP-
};

ShareChangeTerms expected_share_change(double eta, double omega_plus, double omega_minus,
                                       double dp_up, double dp_down);

/// Worst-case load weights for the share pipeline; adverse parts of the
/// aggregated (chi1, chi2) normalized, uniform fallback when empty.
WeightVector share_worst_case_weights(const Eigen::VectorXd& chi1_agg,
                                      const Eigen::VectorXd& chi2_agg, double p_share,
                                      bool strict = false);

struct ContributionPotentials {
  double forward = 0.0;  ///< FCP >= 0
  double reverse = 0.0;  ///< RCP <= 0, stored signed
};

ContributionPotentials contribution_potentials(const Eigen::VectorXd& v);

struct FtrBounds {
  double lower = 0.0;  ///< p_share - |RCP|
  double upper = 0.0;  ///< p_share + FCP
};

FtrBounds ftr_bounds(double p_share, double fcp, double rcp);

/// Risk-adjusted profit of holding `ftr` at price `pi` on a path with the
/// given contribution potentials and spread.
double risk_adjusted_profit(double ftr, double fcp, double rcp, double spread, double pi);

struct SignedFtrs {
  double plus = 0.0;   ///< FTR - max(0, FCP - |RCP|)
  double minus = 0.0;  ///< FTR - min(0, FCP - |RCP|)
};

SignedFtrs signed_ftrs(double ftr, double fcp, double rcp);

/// One path's term of the player objective; quantities are the
/// signed-adjusted awards, prices the player's own bids. A type with no
/// position carries zero quantities and price.
struct PathDecisionTerm {
  double zeta_f = 0.0;
  double zeta_r = 0.0;
  double spread = 0.0;
  double ftr_obl_plus = 0.0;
  double ftr_obl_minus = 0.0;
  double pi_obl = 0.0;
  double ftr_opt_plus = 0.0;
  double ftr_opt_minus = 0.0;
  double pi_opt = 0.0;
};

/// The player objective: obligation terms gated by the forward-chance
/// indicator (zeta_f > zeta_r; the tie counts as reversal-averse and gates
/// the term off), option terms always counted.
double player_objective(const std::vector<PathDecisionTerm>& terms);

/// Full per-(player, path) contribution pipeline output.
struct ContributionMetrics {
  Path path;
  int gen_idx = 0;
  double share = 0.0;          ///< MW along the path orientation
  Eigen::MatrixXd eta;         ///< generators x loads; own column is zero
  Eigen::MatrixXd chi1;        ///< generators x loads
  Eigen::MatrixXd chi2;
  Eigen::VectorXd chi1_agg;    ///< per load, summed over j != i
  Eigen::VectorXd chi2_agg;
  Eigen::VectorXd w;           ///< worst-case weights
  Eigen::VectorXd v;           ///< per-load expected share influence
  double fcp = 0.0;
  double rcp = 0.0;
  double ftr_min = 0.0;
  double ftr_max = 0.0;
  bool weight_fallback = false;
};

ContributionMetrics compute_contribution_metrics(const NetworkModel& net,
                                                 const SensitivityMatrices& sens,
                                                 const DispatchEstimate& dispatch,
                                                 const FleetResponse& resp,
                                                 const LoadDeviationModel& model, int gen_idx,
                                                 const Path& path);

}  // namespace ftr
