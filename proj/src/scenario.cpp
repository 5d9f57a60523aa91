#include "ftr/scenario.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "ftr/errors.hpp"

namespace ftr {

namespace {

class StageClock {
public:
  explicit StageClock(std::vector<StageTiming>& sink) : sink_(sink) {}
  template <typename F>
  auto time(const std::string& stage, F&& fn) {
    const auto start = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      record(stage, start);
    } else {
      auto out = fn();
      record(stage, start);
      return out;
    }
  }

private:
  void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    sink_.push_back({stage, dt.count()});
  }
  std::vector<StageTiming>& sink_;
};

}  // namespace

Scenario load_scenario(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("network"))
    throw SchemaError("scenario document needs a 'network' object");
  NetworkModel net = build_network(doc["network"]);

  ScenarioSettings s;
  if (!doc.contains("paths") || !doc["paths"].is_array() || doc["paths"].empty())
    throw SchemaError("scenario document needs a non-empty 'paths' array");
  for (const auto& p : doc["paths"]) {
    int line_id;
    if (p.is_number_integer())
      line_id = p.get<int>();
    else if (p.is_object() && p.contains("line"))
      line_id = p["line"].get<int>();
    else
      throw SchemaError("each path must be a line id or an object with 'line'");
    net.line_index(line_id);  // existence check, throws TopologyError
    s.path_lines.push_back(line_id);
  }

  if (!doc.contains("players") || !doc["players"].is_array())
    throw SchemaError("scenario document needs a 'players' array");
  for (const auto& p : doc["players"]) {
    if (!p.is_object() || !p.contains("generator"))
      throw SchemaError("each player needs a 'generator' reference");
    PlayerDef def;
    def.gen_id = p["generator"].get<int>();
    def.id = p.value("id", static_cast<int>(s.players.size()) + 1);
    net.generator_index(def.gen_id);
    s.players.push_back(def);
  }

  s.deviation_fraction = doc.value("load_deviation_fraction", 0.10);
  if (!(s.deviation_fraction > 0.0) || !(s.deviation_fraction < 1.0))
    throw SchemaError("load_deviation_fraction must lie in (0, 1)");
  s.omega_plus = doc.value("omega_plus", 0.5);

  if (doc.contains("solver")) {
    const auto& sv = doc["solver"];
    s.solver.epsilon = sv.value("epsilon", s.solver.epsilon);
    s.solver.grid_points = sv.value("grid_points", s.solver.grid_points);
    s.solver.max_rounds = sv.value("max_rounds", s.solver.max_rounds);
    s.solver.tau_initial = sv.value("tau_initial", s.solver.tau_initial);
    s.solver.tau_final = sv.value("tau_final", s.solver.tau_final);
    s.solver.tau_shrink = sv.value("tau_shrink", s.solver.tau_shrink);
    s.solver.simultaneous = sv.value("simultaneous", s.solver.simultaneous);
    s.rho_obl_base = sv.value("obligation_base_price", 0.0);
  }
  s.seed = doc.value("seed", 1u);
  s.output_dir = doc.value("output_dir", std::string("out"));
  return Scenario{std::move(net), std::move(s)};
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("scenario file is not valid JSON: ") + e.what());
  }
  return load_scenario(doc);
}

namespace {

struct PipelineContext {
  SensitivityMatrices sens;
  DispatchEstimate base;
  LoadDeviationModel model;
  FleetResponse resp;
  std::vector<Path> paths;
  std::vector<RiskMetrics> risk;
  std::vector<std::vector<ContributionMetrics>> contrib;
  KktSystem system;
};

Path orient_monitored_line(const NetworkModel& net, const DispatchEstimate& base,
                           int line_idx) {
  // Paths run along the estimated flow; a dead line falls back to the
  // direction with the nonnegative spread.
  const double flow = base.line_flow[line_idx];
  double sign = flow >= 0 ? 1.0 : -1.0;
  if (std::abs(flow) < 1e-9) {
    Path fwd = make_path(net, line_idx, 1.0);
    sign = path_spread(base, fwd) >= 0 ? 1.0 : -1.0;
  }
  return make_path(net, line_idx, sign);
}

PipelineContext build_pipeline(const Scenario& sc, std::vector<StageTiming>& timings,
                               bool need_system) {
  StageClock clock(timings);
  const NetworkModel& net = sc.net;
  PipelineContext ctx;

  ctx.base = clock.time("base_dcopf", [&] { return run_dcopf(net, net.nominal_demand()); });
  ctx.sens = clock.time("sensitivities", [&] {
    SensitivityMatrices sens = compute_shift_factors(net);
    compute_distribution_factors(net, sens, ctx.base);
    return sens;
  });
  ctx.model = make_load_deviation_model(net, sc.settings.deviation_fraction,
                                        sc.settings.omega_plus);
  ctx.resp = clock.time("redispatch_responses",
                        [&] { return compute_fleet_response(net, ctx.base, ctx.model); });

  clock.time("risk_metrics", [&] {
    for (int line_id : sc.settings.path_lines) {
      Path p = orient_monitored_line(net, ctx.base, net.line_index(line_id));
      ctx.paths.push_back(p);
      ctx.risk.push_back(compute_risk_metrics(net, ctx.sens, ctx.base, ctx.resp, ctx.model, p));
    }
  });

  clock.time("contribution_metrics", [&] {
    for (const PlayerDef& pl : sc.settings.players) {
      const int g = net.generator_index(pl.gen_id);
      std::vector<ContributionMetrics> row;
      for (const Path& p : ctx.paths)
        row.push_back(
            compute_contribution_metrics(net, ctx.sens, ctx.base, ctx.resp, ctx.model, g, p));
      ctx.contrib.push_back(std::move(row));
    }
  });

  if (need_system) {
    clock.time("reduce_bilevel", [&] {
      std::vector<PathMarketData> pd;
      for (const RiskMetrics& m : ctx.risk) {
        PathMarketData d;
        d.path = m.path;
        d.zeta_f = m.zeta_f;
        d.zeta_r = m.zeta_r;
        d.spread = m.spread;
        d.obligation_band = BidBand{sc.settings.rho_obl_base, m.caps.obligation};
        d.option_band = BidBand{std::max(0.0, m.caps.obligation), m.caps.option};
        pd.push_back(d);
      }
      Eigen::MatrixXd impact = build_impact_coefficients(net, ctx.sens, ctx.paths);
      Eigen::VectorXd caps(net.line_count());
      std::vector<int> line_ids;
      for (int l = 0; l < net.line_count(); ++l) {
        caps[l] = net.lines()[l].capacity;
        line_ids.push_back(net.lines()[l].id);
      }
      ctx.system = reduce_bilevel(pd, ctx.contrib, impact, caps, line_ids,
                                  sc.settings.rho_obl_base);
    });
  }
  return ctx;
}

StateResult summarize_state(const PipelineContext& ctx, const Scenario& sc, FtrType type,
                            const EquilibriumSolution& sol) {
  const int np = static_cast<int>(sc.settings.players.size());
  const int npa = static_cast<int>(ctx.paths.size());
  StateResult st;
  st.type = type;
  st.solution = sol;
  st.bids = Eigen::MatrixXd::Zero(np, npa);
  st.awards = Eigen::MatrixXd::Zero(np, npa);
  st.profits = Eigen::MatrixXd::Zero(np, npa);
  st.mcp_dual = Eigen::VectorXd::Zero(npa);
  st.mcp_award_avg = Eigen::VectorXd::Zero(npa);

  const Eigen::VectorXd mu_net = sol.point.mu_line_up - sol.point.mu_line_lo;
  for (int pa = 0; pa < npa; ++pa) {
    double bid_mass = 0.0, award_mass = 0.0;
    for (int pl = 0; pl < np; ++pl) {
      const int s = ctx.system.slot(pl, pa, type);
      if (s < 0 || !sol.profile.active[s]) continue;
      const double award = sol.point.award[s];
      const double bid = sol.profile.bid[s];
      st.bids(pl, pa) = bid;
      st.awards(pl, pa) = award;
      // Realized risk-adjusted profit at the full spread (reporting view;
      // the game itself optimizes the chance-weighted objective).
      st.profits(pl, pa) = risk_adjusted_profit(award, ctx.contrib[pl][pa].fcp,
                                                ctx.contrib[pl][pa].rcp,
                                                ctx.risk[pa].spread, bid);
      bid_mass += bid * award;
      award_mass += award;
    }
    st.mcp_award_avg[pa] = award_mass > 1e-12 ? bid_mass / award_mass : 0.0;
    // Dual-based clearing price of the path: impact-weighted line duals.
    double dual = 0.0;
    for (int l = 0; l < ctx.system.line_cap.size(); ++l) {
      double m = 0.0;
      for (int pl = 0; pl < np && m == 0.0; ++pl) {
        const int s = ctx.system.slot(pl, pa, type);
        if (s >= 0)
          m = type == FtrType::option ? std::max(0.0, ctx.system.offer_impact(s, l))
                                      : ctx.system.offer_impact(s, l);
      }
      dual += m * mu_net[l];
    }
    st.mcp_dual[pa] = dual;
  }
  return st;
}

}  // namespace

RunReport run_metrics_only(const Scenario& scenario) {
  RunReport report;
  PipelineContext ctx = build_pipeline(scenario, report.timings, false);
  report.path_line_ids = scenario.settings.path_lines;
  for (const PlayerDef& p : scenario.settings.players) report.player_ids.push_back(p.id);
  report.base_dispatch = ctx.base;
  report.risk = std::move(ctx.risk);
  report.contrib = std::move(ctx.contrib);
  return report;
}

RunReport run_scenario(const Scenario& scenario) {
  RunReport report;
  StageClock clock(report.timings);
  PipelineContext ctx = build_pipeline(scenario, report.timings, true);

  report.path_line_ids = scenario.settings.path_lines;
  for (const PlayerDef& p : scenario.settings.players) report.player_ids.push_back(p.id);
  report.base_dispatch = ctx.base;
  report.risk = ctx.risk;
  report.contrib = ctx.contrib;
  report.system = ctx.system;

  const SolveOptions& opts = scenario.settings.solver;
  const KktSystem& sys = ctx.system;

  EquilibriumSolution sol_a = clock.time("state_all_obligation", [&] {
    return iterate_sequential(sys, uniform_type_profile(sys, FtrType::obligation), opts, false);
  });
  report.state_obligation = summarize_state(ctx, scenario, FtrType::obligation, sol_a);

  EquilibriumSolution sol_b = clock.time("state_all_option", [&] {
    return iterate_sequential(sys, uniform_type_profile(sys, FtrType::option), opts, false);
  });
  report.state_option = summarize_state(ctx, scenario, FtrType::option, sol_b);

  // Instrument choice per (player, path): the state with the better realized
  // profit, the risk-free option on ties.
  const int np = static_cast<int>(scenario.settings.players.size());
  const int npa = static_cast<int>(ctx.paths.size());
  report.chosen_type = Eigen::MatrixXi::Constant(np, npa, -1);
  for (int pl = 0; pl < np; ++pl) {
    for (int pa = 0; pa < npa; ++pa) {
      const bool has_obl = sys.slot(pl, pa, FtrType::obligation) >= 0;
      const bool has_opt = sys.slot(pl, pa, FtrType::option) >= 0;
      if (!has_obl && !has_opt) continue;
      if (has_obl && !has_opt) {
        report.chosen_type(pl, pa) = static_cast<int>(FtrType::obligation);
      } else if (!has_obl) {
        report.chosen_type(pl, pa) = static_cast<int>(FtrType::option);
      } else {
        const double pa_obl = report.state_obligation.profits(pl, pa);
        const double pa_opt = report.state_option.profits(pl, pa);
        report.chosen_type(pl, pa) =
            static_cast<int>(pa_obl > pa_opt ? FtrType::obligation : FtrType::option);
      }
    }
  }

  auto chosen_profile = [&](bool midpoint_bids) {
    BidProfile prof;
    prof.active.assign(sys.offers.size(), 0);
    prof.bid = Eigen::VectorXd::Zero(sys.offers.size());
    prof.q_cap = Eigen::VectorXd::Zero(sys.offers.size());
    for (size_t i = 0; i < sys.offers.size(); ++i) {
      prof.bid[i] = 0.5 * (sys.offers[i].band.lo + sys.offers[i].band.hi);
      prof.q_cap[i] = sys.offers[i].q_max;
    }
    for (int pl = 0; pl < np; ++pl)
      for (int pa = 0; pa < npa; ++pa) {
        if (report.chosen_type(pl, pa) < 0) continue;
        const FtrType t = static_cast<FtrType>(report.chosen_type(pl, pa));
        const int s = sys.slot(pl, pa, t);
        prof.active[s] = 1;
        if (!midpoint_bids) {
          const StateResult& st =
              t == FtrType::obligation ? report.state_obligation : report.state_option;
          prof.bid[s] = st.bids(pl, pa);
        }
      }
    return prof;
  };

  report.kkt_solution = clock.time("solve_kkt", [&] {
    return solve_kkt(sys, chosen_profile(true), opts);
  });

  // The fixed-point polish starts from the state-derived bids: those already
  // emerged from best-response play, so they sit near the game's rest point.
  // The joint KKT solution is kept as the other route and compared below.
  report.final_solution = clock.time("best_response_fixed_point", [&] {
    return iterate_sequential(sys, chosen_profile(false), opts, true);
  });
  report.route_gap =
      std::abs(report.kkt_solution.joint_objective - report.final_solution.joint_objective);

  report.nash = clock.time("verify_nash", [&] {
    return verify_nash(sys, report.final_solution, opts);
  });

  report.fully_converged = report.state_obligation.solution.status == IterationStatus::converged &&
                           report.state_option.solution.status == IterationStatus::converged &&
                           report.final_solution.status == IterationStatus::converged &&
                           report.nash.certified;
  return report;
}

nlohmann::json solution_to_json(const RunReport& report) {
  nlohmann::json doc;
  doc["joint_objective"] = report.final_solution.joint_objective;
  doc["offers"] = nlohmann::json::array();
  const KktSystem& sys = report.system;
  for (size_t i = 0; i < sys.offers.size(); ++i) {
    if (!report.final_solution.profile.active[i]) continue;
    const GameOffer& o = sys.offers[i];
    doc["offers"].push_back({{"player", report.player_ids[o.player]},
                             {"line", report.path_line_ids[o.path]},
                             {"type", to_string(o.type)},
                             {"bid", report.final_solution.profile.bid[i]},
                             {"q_cap", report.final_solution.profile.q_cap[i]},
                             {"award", report.final_solution.point.award[i]}});
  }
  return doc;
}

NashReport verify_saved_solution(const Scenario& scenario, const nlohmann::json& doc,
                                 const std::optional<int>& grid_override,
                                 const std::optional<double>& eps_override) {
  std::vector<StageTiming> timings;
  PipelineContext ctx = build_pipeline(scenario, timings, true);
  const KktSystem& sys = ctx.system;

  BidProfile prof;
  prof.active.assign(sys.offers.size(), 0);
  prof.bid = Eigen::VectorXd::Zero(sys.offers.size());
  prof.q_cap = Eigen::VectorXd::Zero(sys.offers.size());
  for (size_t i = 0; i < sys.offers.size(); ++i) prof.q_cap[i] = sys.offers[i].q_max;

  if (!doc.contains("offers") || !doc["offers"].is_array())
    throw SchemaError("solution document needs an 'offers' array");
  for (const auto& j : doc["offers"]) {
    int player_idx = -1;
    for (size_t pl = 0; pl < scenario.settings.players.size(); ++pl)
      if (scenario.settings.players[pl].id == j.at("player").get<int>())
        player_idx = static_cast<int>(pl);
    int path_idx = -1;
    for (size_t pa = 0; pa < scenario.settings.path_lines.size(); ++pa)
      if (scenario.settings.path_lines[pa] == j.at("line").get<int>())
        path_idx = static_cast<int>(pa);
    if (player_idx < 0 || path_idx < 0)
      throw SchemaError("solution references an unknown player or line");
    const int s = sys.slot(player_idx, path_idx,
                           ftr_type_from_string(j.at("type").get<std::string>()));
    if (s < 0) throw SchemaError("solution offer is not admissible in this scenario");
    prof.active[s] = 1;
    prof.bid[s] = j.at("bid").get<double>();
    prof.q_cap[s] = j.value("q_cap", sys.offers[s].q_max);
  }

  SolveOptions opts = scenario.settings.solver;
  if (grid_override) opts.grid_points = *grid_override;
  if (eps_override) opts.epsilon = *eps_override;
  EquilibriumSolution sol = evaluate_profile(sys, prof);
  return verify_nash(sys, sol, opts);
}

}  // namespace ftr
