#include "ftr/risk.hpp"

#include <cmath>

#include "ftr/errors.hpp"

namespace ftr {

LoadDeviationModel make_load_deviation_model(const NetworkModel& net, double fraction,
                                             double omega_plus) {
  if (!(fraction > 0.0) || !(fraction < 1.0))
    throw SchemaError("load deviation fraction must lie in (0, 1)");
  if (omega_plus < 0.0 || omega_plus > 1.0)
    throw SchemaError("omega_plus must lie in [0, 1]");
  const int nd = net.load_count();
  LoadDeviationModel m;
  m.delta.resize(nd);
  for (int d = 0; d < nd; ++d) m.delta[d] = fraction * net.loads()[d].demand;
  m.omega_plus = Eigen::VectorXd::Constant(nd, omega_plus);
  m.omega_minus = Eigen::VectorXd::Constant(nd, 1.0 - omega_plus);
  return m;
}

RedispatchResponse redispatch_response(const NetworkModel& net, const DispatchEstimate& base,
                                       int load_idx, double delta_d) {
  RedispatchResponse r;
  if (delta_d == 0.0) {
    r.up = Eigen::VectorXd::Zero(net.generator_count());
    r.down = r.up;
    return r;
  }
  Eigen::VectorXd demand = net.nominal_demand();
  demand[load_idx] += delta_d;
  r.up = run_dcopf(net, demand).gen_output - base.gen_output;
  demand[load_idx] -= 2.0 * delta_d;
  r.down = run_dcopf(net, demand).gen_output - base.gen_output;
  return r;
}

FleetResponse compute_fleet_response(const NetworkModel& net, const DispatchEstimate& base,
                                     const LoadDeviationModel& model) {
  const int ng = net.generator_count();
  const int nd = net.load_count();
  FleetResponse f;
  f.up.resize(ng, nd);
  f.down.resize(ng, nd);
  for (int d = 0; d < nd; ++d) {
    RedispatchResponse r = redispatch_response(net, base, d, model.delta[d]);
    f.up.col(d) = r.up;
    f.down.col(d) = r.down;
  }
  return f;
}

double line_sensitivity(const NetworkModel& net, const SensitivityMatrices& sens, int gen_idx,
                        int load_idx, int line_idx) {
  const int jb = net.bus_index(net.generators()[gen_idx].bus);
  const int db = net.bus_index(net.loads()[load_idx].bus);
  return sens.shift(line_idx, jb) - sens.shift(line_idx, db);
}

LoadEffectTerms load_effect_terms(const Eigen::VectorXd& psi, const Eigen::VectorXd& resp_up,
                                  const Eigen::VectorXd& resp_down, double omega_plus,
                                  double omega_minus) {
  LoadEffectTerms t;
  t.l1 = omega_plus * psi.dot(resp_up);
  t.l2 = omega_minus * psi.dot(resp_down);
  return t;
}

double expected_line_effect(double psi, double delta_d, double weight) {
  return psi * delta_d * weight;
}

WeightVector worst_case_weights(const Eigen::VectorXd& l1, const Eigen::VectorXd& l2,
                                double p_est, bool strict) {
  const int nd = static_cast<int>(l1.size());
  WeightVector out;
  out.w.resize(nd);
  // Zero flow is treated like the positive branch: reversals are adverse.
  const bool forward = p_est >= 0.0;
  double denom = 0.0;
  for (int d = 0; d < nd; ++d) {
    const double adverse = forward ? std::min(l1[d], 0.0) + std::min(l2[d], 0.0)
                                   : std::max(l1[d], 0.0) + std::max(l2[d], 0.0);
    out.w[d] = adverse;
    denom += adverse;
  }
  if (std::abs(denom) < 1e-12) {
    if (strict) throw DegenerateWeightsError("no adverse-signed load effects on this path");
    out.w.setConstant(nd > 0 ? 1.0 / nd : 0.0);
    out.fallback = true;
    return out;
  }
  out.w /= denom;
  return out;
}

PotentialFlows potential_flows(const Eigen::VectorXd& phi) {
  PotentialFlows p;
  for (int d = 0; d < phi.size(); ++d) {
    if (phi[d] > 0.0)
      p.forward += phi[d];
    else
      p.reverse += phi[d];
  }
  return p;
}

ChanceCoefficients chance_coefficients(double p_est, double fpf, double rpf) {
  const double denom = fpf + p_est + std::abs(rpf);
  if (!(denom > 1e-12))
    throw DegenerateChanceError("chance coefficient denominator is not positive");
  ChanceCoefficients z;
  z.forward = (fpf + p_est) / denom;
  z.reverse = std::abs(rpf) / denom;
  return z;
}

BidCaps bid_caps(double zeta_f, double spread) {
  BidCaps c;
  c.obligation = (2.0 * zeta_f - 1.0) * spread;
  c.option = zeta_f * spread;
  return c;
}

double decision_function(double zeta_f, double spread, double pi_obl, double pi_opt,
                         double q_obl, double q_opt) {
  return ((2.0 * zeta_f - 1.0) * spread - pi_obl) * q_obl +
         (zeta_f * spread - pi_opt) * q_opt;
}

RiskMetrics compute_risk_metrics(const NetworkModel& net, const SensitivityMatrices& sens,
                                 const DispatchEstimate& dispatch, const FleetResponse& resp,
                                 const LoadDeviationModel& model, const Path& path) {
  const int nd = net.load_count();
  const int ng = net.generator_count();

  RiskMetrics m;
  m.path = path;
  m.p_est = path_flow(dispatch, path);
  m.spread = path_spread(dispatch, path);
  m.l1.resize(nd);
  m.l2.resize(nd);

  Eigen::VectorXd psi(ng);
  for (int d = 0; d < nd; ++d) {
    for (int g = 0; g < ng; ++g)
      psi[g] = path.sign * line_sensitivity(net, sens, g, d, path.line_idx);
    LoadEffectTerms t = load_effect_terms(psi, resp.up.col(d), resp.down.col(d),
                                          model.omega_plus[d], model.omega_minus[d]);
    m.l1[d] = t.l1;
    m.l2[d] = t.l2;
  }

  WeightVector w = worst_case_weights(m.l1, m.l2, m.p_est);
  m.w = w.w;
  m.weight_fallback = w.fallback;
  m.phi = m.w.cwiseProduct(m.l1 + m.l2);

  PotentialFlows p = potential_flows(m.phi);
  m.fpf = p.forward;
  m.rpf = p.reverse;

  ChanceCoefficients z = chance_coefficients(m.p_est, m.fpf, m.rpf);
  m.zeta_f = z.forward;
  m.zeta_r = z.reverse;
  m.caps = bid_caps(m.zeta_f, m.spread);
  return m;
}

}  // namespace ftr
