#include "ftr/clearing.hpp"

#include <cmath>

#include "ftr/errors.hpp"
#include "ftr/lp.hpp"

namespace ftr {

const char* to_string(FtrType t) {
  return t == FtrType::obligation ? "obligation" : "option";
}

FtrType ftr_type_from_string(const std::string& s) {
  if (s == "obligation") return FtrType::obligation;
  if (s == "option") return FtrType::option;
  throw SchemaError("unknown FTR type '" + s + "'");
}

Eigen::MatrixXd build_impact_coefficients(const NetworkModel& net,
                                          const SensitivityMatrices& sens,
                                          const std::vector<Path>& paths) {
  Eigen::MatrixXd m(paths.size(), net.line_count());
  for (size_t p = 0; p < paths.size(); ++p)
    for (int l = 0; l < net.line_count(); ++l)
      m(p, l) = ptdf(sens, l, paths[p].source_bus_idx, paths[p].sink_bus_idx);
  return m;
}

ClearingOutcome clear_market(const ClearingInstance& instance) {
  const int no = static_cast<int>(instance.offers.size());
  const int nl = static_cast<int>(instance.line_cap.size());
  if (instance.impact.rows() != no || instance.impact.cols() != nl)
    throw SolverError("clearing instance impact matrix shape mismatch");
  for (const Offer& o : instance.offers)
    if (o.q_min > o.q_max + 1e-12)
      throw InfeasibleInstanceError("offer has q_min above q_max");

  // Columns: awards then one bounded slack per line mapping the two-sided
  // capacity constraint onto an equality row.
  lp::Problem p;
  p.a = Eigen::MatrixXd::Zero(nl, no + nl);
  p.rhs = instance.line_cap;
  p.cost = Eigen::VectorXd::Zero(no + nl);
  p.lower = Eigen::VectorXd::Zero(no + nl);
  p.upper = Eigen::VectorXd::Zero(no + nl);

  for (int i = 0; i < no; ++i) {
    const Offer& o = instance.offers[i];
    p.cost[i] = -o.price;  // maximize revenue
    p.lower[i] = o.q_min;
    p.upper[i] = o.q_max;
    for (int l = 0; l < nl; ++l) {
      const double m = instance.impact(i, l);
      p.a(l, i) = (o.type == FtrType::option) ? std::max(0.0, m) : m;
    }
  }
  for (int l = 0; l < nl; ++l) {
    p.a(l, no + l) = 1.0;
    p.lower[no + l] = 0.0;
    p.upper[no + l] = 2.0 * instance.line_cap[l];
  }

  lp::Solution s = lp::solve(p);
  if (s.status == lp::Status::infeasible)
    throw InfeasibleInstanceError("minimum awards are not simultaneously feasible");
  if (s.status != lp::Status::optimal) throw SolverError("clearing LP did not converge");

  ClearingOutcome out;
  out.award = s.x.head(no);

  // A free offer contributes nothing to revenue, so any award to it is an
  // arbitrary degenerate choice; pin it at the floor for determinism.
  for (int i = 0; i < no; ++i)
    if (std::abs(instance.offers[i].price) < 1e-12) out.award[i] = instance.offers[i].q_min;

  // Pro-rata rationing at exact ties: offers with identical price, type and
  // flow impact are interchangeable in the LP, so their group total is
  // redistributed in proportion to the offered spans. Keeps the solution
  // optimal and feasible while making equal-bid outcomes anonymous.
  std::vector<bool> grouped(no, false);
  for (int i = 0; i < no; ++i) {
    if (grouped[i]) continue;
    std::vector<int> group = {i};
    for (int j = i + 1; j < no; ++j) {
      if (grouped[j]) continue;
      if (instance.offers[j].type != instance.offers[i].type) continue;
      if (std::abs(instance.offers[j].price - instance.offers[i].price) > 1e-9) continue;
      if ((instance.impact.row(j) - instance.impact.row(i)).cwiseAbs().maxCoeff() > 1e-12)
        continue;
      group.push_back(j);
    }
    if (group.size() < 2) continue;
    double total = 0.0, min_sum = 0.0, span_sum = 0.0;
    for (int k : group) {
      total += out.award[k];
      min_sum += instance.offers[k].q_min;
      span_sum += instance.offers[k].q_max - instance.offers[k].q_min;
    }
    const double t = span_sum > 1e-12 ? (total - min_sum) / span_sum : 0.0;
    for (int k : group) {
      out.award[k] = instance.offers[k].q_min +
                     t * (instance.offers[k].q_max - instance.offers[k].q_min);
      grouped[k] = true;
    }
  }
  out.objective = -s.objective;
  out.degenerate = s.degenerate;
  out.mu_line = -s.row_duals;
  out.mu_line_up.resize(nl);
  out.mu_line_lo.resize(nl);
  out.binding.resize(nl);
  for (int l = 0; l < nl; ++l) {
    out.mu_line_up[l] = std::max(0.0, out.mu_line[l]);
    out.mu_line_lo[l] = std::max(0.0, -out.mu_line[l]);
    const double slack = s.x[no + l];
    out.binding[l] = slack < 1e-7 || slack > 2.0 * instance.line_cap[l] - 1e-7;
  }
  out.mu_plus.resize(no);
  out.mu_minus.resize(no);
  for (int i = 0; i < no; ++i) {
    out.mu_plus[i] = std::max(0.0, -s.reduced_costs[i]);
    out.mu_minus[i] = std::max(0.0, s.reduced_costs[i]);
  }
  return out;
}

ClearingInstance parse_clearing_instance(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("lines") || !doc.contains("offers"))
    throw SchemaError("clearing instance needs 'lines' and 'offers'");

  ClearingInstance inst;
  const auto& lines = doc["lines"];
  inst.line_cap.resize(lines.size());
  for (size_t l = 0; l < lines.size(); ++l) {
    if (!lines[l].contains("capacity"))
      throw SchemaError("clearing line entry needs 'capacity'");
    inst.line_cap[l] = lines[l]["capacity"].get<double>();
    inst.line_ids.push_back(lines[l].value("id", static_cast<int>(l + 1)));
  }

  const auto& offers = doc["offers"];
  inst.impact.resize(offers.size(), lines.size());
  for (size_t i = 0; i < offers.size(); ++i) {
    const auto& j = offers[i];
    Offer o;
    o.player = j.value("player", static_cast<int>(i + 1));
    o.path = j.value("path", 0);
    o.type = ftr_type_from_string(j.value("type", "obligation"));
    if (!j.contains("price") || !j.contains("q_max"))
      throw SchemaError("offer needs 'price' and 'q_max'");
    o.price = j["price"].get<double>();
    o.q_min = j.value("q_min", 0.0);
    o.q_max = j["q_max"].get<double>();
    if (!j.contains("impact") || j["impact"].size() != lines.size())
      throw SchemaError("offer 'impact' must list one coefficient per line");
    for (size_t l = 0; l < lines.size(); ++l)
      inst.impact(i, l) = j["impact"][l].get<double>();
    inst.offers.push_back(o);
  }
  return inst;
}

nlohmann::json to_json(const ClearingInstance& instance) {
  nlohmann::json doc;
  doc["lines"] = nlohmann::json::array();
  for (size_t l = 0; l < instance.line_ids.size(); ++l)
    doc["lines"].push_back({{"id", instance.line_ids[l]}, {"capacity", instance.line_cap[l]}});
  doc["offers"] = nlohmann::json::array();
  for (size_t i = 0; i < instance.offers.size(); ++i) {
    const Offer& o = instance.offers[i];
    nlohmann::json j = {{"player", o.player},   {"path", o.path},
                        {"type", to_string(o.type)}, {"price", o.price},
                        {"q_min", o.q_min},     {"q_max", o.q_max}};
    j["impact"] = nlohmann::json::array();
    for (int l = 0; l < instance.impact.cols(); ++l) j["impact"].push_back(instance.impact(i, l));
    doc["offers"].push_back(j);
  }
  return doc;
}

nlohmann::json to_json(const ClearingOutcome& outcome, const ClearingInstance& instance) {
  nlohmann::json doc;
  doc["objective"] = outcome.objective;
  doc["degenerate"] = outcome.degenerate;
  doc["awards"] = nlohmann::json::array();
  for (size_t i = 0; i < instance.offers.size(); ++i) {
    const Offer& o = instance.offers[i];
    doc["awards"].push_back({{"player", o.player},
                             {"path", o.path},
                             {"type", to_string(o.type)},
                             {"price", o.price},
                             {"award", outcome.award[i]},
                             {"mu_plus", outcome.mu_plus[i]},
                             {"mu_minus", outcome.mu_minus[i]}});
  }
  doc["lines"] = nlohmann::json::array();
  for (size_t l = 0; l < instance.line_ids.size(); ++l)
    doc["lines"].push_back({{"id", instance.line_ids[l]},
                            {"mu", outcome.mu_line[l]},
                            {"binding", static_cast<bool>(outcome.binding[l])}});
  return doc;
}

}  // namespace ftr
