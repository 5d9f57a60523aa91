#include "ftr/contribution.hpp"

#include <cmath>
#include <stdexcept>

#include "ftr/errors.hpp"

namespace ftr {

double player_share(const NetworkModel& net, const SensitivityMatrices& sens,
                    const DispatchEstimate& dispatch, int gen_idx, const Path& path) {
  const double d = distribution_factor(net, sens, dispatch, gen_idx, path.line_idx);
  return path.sign * d * dispatch.gen_output[gen_idx];
}

double share_sensitivity(const NetworkModel& net, const SensitivityMatrices& sens,
                         const DispatchEstimate& dispatch, int player_gen_idx,
                         int other_gen_idx, int load_idx, const Path& path, double delta_p) {
  if (player_gen_idx == other_gen_idx)
    throw std::invalid_argument("share_sensitivity requires distinct generators");
  if (delta_p == 0.0) throw ZeroPerturbationError("share sensitivity needs delta_p != 0");
  const double before = slack_distribution_factor(net, sens, dispatch, path.line_idx);
  const double after =
      update_slack_factor(net, sens, dispatch, path.line_idx, other_gen_idx, load_idx, delta_p);
  return path.sign * (after - before) / delta_p * dispatch.gen_output[player_gen_idx];
}

ShareChangeTerms expected_share_change(double eta, double omega_plus, double omega_minus,
                                       double dp_up, double dp_down) {
  ShareChangeTerms t;
  t.chi1 = omega_plus * eta * dp_up;
  t.chi2 = omega_minus * eta * dp_down;
  return t;
}

WeightVector share_worst_case_weights(const Eigen::VectorXd& chi1_agg,
                                      const Eigen::VectorXd& chi2_agg, double p_share,
                                      bool strict) {
  // Same normalization structure as the flow-side weights, driven by the
  // sign of the player's share instead of the line flow.
  return worst_case_weights(chi1_agg, chi2_agg, p_share, strict);
}

ContributionPotentials contribution_potentials(const Eigen::VectorXd& v) {
  ContributionPotentials p;
  for (int d = 0; d < v.size(); ++d) {
    if (v[d] > 0.0)
      p.forward += v[d];
    else
      p.reverse += v[d];
  }
  return p;
}

FtrBounds ftr_bounds(double p_share, double fcp, double rcp) {
  FtrBounds b;
  b.lower = p_share - std::abs(rcp);
  b.upper = p_share + fcp;
  return b;
}

double risk_adjusted_profit(double ftr, double fcp, double rcp, double spread, double pi) {
  const double gap = fcp - std::abs(rcp);
  return (ftr - std::max(0.0, gap)) * spread - (ftr - std::min(0.0, gap)) * pi;
}

SignedFtrs signed_ftrs(double ftr, double fcp, double rcp) {
  const double gap = fcp - std::abs(rcp);
  SignedFtrs s;
  s.plus = ftr - std::max(0.0, gap);
  s.minus = ftr - std::min(0.0, gap);
  return s;
}

double player_objective(const std::vector<PathDecisionTerm>& terms) {
  double obj = 0.0;
  for (const PathDecisionTerm& t : terms) {
    if (t.zeta_f > t.zeta_r) {
      obj += (2.0 * t.zeta_f - 1.0) * t.spread * t.ftr_obl_plus - t.pi_obl * t.ftr_obl_minus;
    }
    obj += t.zeta_f * t.spread * t.ftr_opt_plus - t.pi_opt * t.ftr_opt_minus;
  }
  return obj;
}

ContributionMetrics compute_contribution_metrics(const NetworkModel& net,
                                                 const SensitivityMatrices& sens,
                                                 const DispatchEstimate& dispatch,
                                                 const FleetResponse& resp,
                                                 const LoadDeviationModel& model, int gen_idx,
                                                 const Path& path) {
  const int ng = net.generator_count();
  const int nd = net.load_count();

  ContributionMetrics m;
  m.path = path;
  m.gen_idx = gen_idx;
  m.share = player_share(net, sens, dispatch, gen_idx, path);
  m.eta = Eigen::MatrixXd::Zero(ng, nd);
  m.chi1 = Eigen::MatrixXd::Zero(ng, nd);
  m.chi2 = Eigen::MatrixXd::Zero(ng, nd);
  m.chi1_agg = Eigen::VectorXd::Zero(nd);
  m.chi2_agg = Eigen::VectorXd::Zero(nd);

  for (int d = 0; d < nd; ++d) {
    for (int j = 0; j < ng; ++j) {
      if (j == gen_idx) continue;  // own output independent of j holds only off-diagonal
      // Finite-difference perturbation: the forward response when it moved,
      // otherwise the backward one; a generator that never responds
      // contributes nothing.
      double dp = resp.up(j, d);
      if (std::abs(dp) < 1e-12) dp = resp.down(j, d);
      if (std::abs(dp) < 1e-12) continue;
      const double eta = share_sensitivity(net, sens, dispatch, gen_idx, j, d, path, dp);
      m.eta(j, d) = eta;
      ShareChangeTerms t = expected_share_change(eta, model.omega_plus[d], model.omega_minus[d],
                                                 resp.up(j, d), resp.down(j, d));
      m.chi1(j, d) = t.chi1;
      m.chi2(j, d) = t.chi2;
      m.chi1_agg[d] += t.chi1;
      m.chi2_agg[d] += t.chi2;
    }
  }

  WeightVector w = share_worst_case_weights(m.chi1_agg, m.chi2_agg, m.share);
  m.w = w.w;
  m.weight_fallback = w.fallback;
  m.v = m.w.cwiseProduct(m.chi1_agg + m.chi2_agg);

  ContributionPotentials p = contribution_potentials(m.v);
  m.fcp = p.forward;
  m.rcp = p.reverse;

  FtrBounds b = ftr_bounds(m.share, m.fcp, m.rcp);
  m.ftr_min = b.lower;
  m.ftr_max = b.upper;
  return m;
}

}  // namespace ftr
