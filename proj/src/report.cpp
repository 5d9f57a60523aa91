#include "ftr/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ftr/errors.hpp"

namespace ftr {

namespace {

std::string fmt(double v) {
  char buf[48];
  // Keep -0.0000 out of the tables.
  if (v == 0.0) v = 0.0;
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

class CsvWriter {
public:
  CsvWriter(const std::string& dir, const std::string& name) : path_(dir + "/" + name) {
    out_.open(path_);
    if (!out_) throw IoError("cannot open " + path_ + " for writing");
  }
  ~CsvWriter() { out_.close(); }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("write failed for " + path_);
  }

private:
  std::string path_;
  std::ofstream out_;
};

std::vector<std::string> line_header(const RunReport& report, std::vector<std::string> prefix) {
  for (int id : report.path_line_ids) prefix.push_back("line_" + std::to_string(id));
  return prefix;
}

void write_zeta(const RunReport& report, const std::string& dir) {
  CsvWriter csv(dir, "table_zeta.csv");
  csv.row({"path", "p_est", "spread", "fpf", "rpf", "zeta_f", "zeta_r", "cap_obligation",
           "cap_option"});
  for (size_t pa = 0; pa < report.risk.size(); ++pa) {
    const RiskMetrics& m = report.risk[pa];
    csv.row({"line_" + std::to_string(report.path_line_ids[pa]), fmt(m.p_est), fmt(m.spread),
             fmt(m.fpf), fmt(m.rpf), fmt(m.zeta_f), fmt(m.zeta_r), fmt(m.caps.obligation),
             fmt(m.caps.option)});
  }
}

void write_fcp_rcp(const RunReport& report, const std::string& dir) {
  CsvWriter csv(dir, "table_fcp_rcp.csv");
  csv.row(line_header(report, {"player", "metric"}));
  for (size_t pl = 0; pl < report.contrib.size(); ++pl) {
    std::vector<std::string> fcp = {std::to_string(report.player_ids[pl]), "fcp"};
    std::vector<std::string> rcp = {std::to_string(report.player_ids[pl]), "rcp"};
    for (const ContributionMetrics& m : report.contrib[pl]) {
      fcp.push_back(fmt(m.fcp));
      rcp.push_back(fmt(m.rcp));
    }
    csv.row(fcp);
    csv.row(rcp);
  }
}

void write_bounds(const RunReport& report, const std::string& dir) {
  CsvWriter csv(dir, "table_bounds.csv");
  csv.row({"player", "path", "share", "ftr_min", "ftr_max"});
  for (size_t pl = 0; pl < report.contrib.size(); ++pl)
    for (size_t pa = 0; pa < report.contrib[pl].size(); ++pa) {
      const ContributionMetrics& m = report.contrib[pl][pa];
      csv.row({std::to_string(report.player_ids[pl]),
               "line_" + std::to_string(report.path_line_ids[pa]), fmt(m.share),
               fmt(m.ftr_min), fmt(m.ftr_max)});
    }
}

void write_state_matrix(const RunReport& report, const std::string& dir,
                        const std::string& name,
                        const Eigen::MatrixXd& obligation_rows,
                        const Eigen::MatrixXd& option_rows) {
  CsvWriter csv(dir, name);
  csv.row(line_header(report, {"player", "state"}));
  for (size_t pl = 0; pl < report.contrib.size(); ++pl) {
    std::vector<std::string> obl = {std::to_string(report.player_ids[pl]), "obligation"};
    std::vector<std::string> opt = {std::to_string(report.player_ids[pl]), "option"};
    for (int pa = 0; pa < obligation_rows.cols(); ++pa) {
      obl.push_back(fmt(obligation_rows(pl, pa)));
      opt.push_back(fmt(option_rows(pl, pa)));
    }
    csv.row(obl);
    csv.row(opt);
  }
}

void write_mcp(const RunReport& report, const std::string& dir) {
  // The clearing-price definition is reported both ways: the dual-based
  // congestion value of the path and the award-weighted accepted bid.
  CsvWriter csv(dir, "table_mcp.csv");
  csv.row(line_header(report, {"type", "method"}));
  auto emit = [&](const char* type, const char* method, const Eigen::VectorXd& v) {
    std::vector<std::string> row = {type, method};
    for (int pa = 0; pa < v.size(); ++pa) row.push_back(fmt(v[pa]));
    csv.row(row);
  };
  emit("obligation", "dual", report.state_obligation.mcp_dual);
  emit("obligation", "award_weighted", report.state_obligation.mcp_award_avg);
  emit("option", "dual", report.state_option.mcp_dual);
  emit("option", "award_weighted", report.state_option.mcp_award_avg);
}

const char* status_name(IterationStatus s) {
  switch (s) {
    case IterationStatus::converged: return "converged";
    case IterationStatus::max_rounds: return "max_rounds";
    case IterationStatus::cycling: return "cycling";
  }
  return "unknown";
}

nlohmann::json residuals_json(const KktResiduals& r) {
  return {{"stationarity", r.stationarity},
          {"complementarity", r.complementarity},
          {"band", r.band},
          {"bounds", r.bounds},
          {"flow", r.flow}};
}

nlohmann::json solution_json(const RunReport& report, const EquilibriumSolution& sol) {
  nlohmann::json out;
  out["joint_objective"] = sol.joint_objective;
  out["status"] = status_name(sol.status);
  out["rounds"] = sol.rounds;
  out["residuals"] = residuals_json(sol.residuals);
  out["positions"] = nlohmann::json::array();
  const KktSystem& sys = report.system;
  for (size_t i = 0; i < sys.offers.size(); ++i) {
    if (!sol.profile.active[i]) continue;
    const GameOffer& o = sys.offers[i];
    out["positions"].push_back({{"player", report.player_ids[o.player]},
                                {"line", report.path_line_ids[o.path]},
                                {"type", to_string(o.type)},
                                {"bid", sol.profile.bid[i]},
                                {"award", sol.point.award[i]}});
  }
  return out;
}

void write_summary(const RunReport& report, const std::string& dir) {
  nlohmann::json doc;
  doc["paths"] = nlohmann::json::array();
  for (size_t pa = 0; pa < report.risk.size(); ++pa)
    doc["paths"].push_back({{"line", report.path_line_ids[pa]},
                            {"zeta_f", report.risk[pa].zeta_f},
                            {"spread", report.risk[pa].spread},
                            {"p_est", report.risk[pa].p_est}});

  doc["state_obligation_status"] = status_name(report.state_obligation.solution.status);
  doc["state_option_status"] = status_name(report.state_option.solution.status);
  doc["kkt_solution"] = solution_json(report, report.kkt_solution);
  doc["final_solution"] = solution_json(report, report.final_solution);
  doc["route_gap"] = report.route_gap;

  doc["chosen_type"] = nlohmann::json::array();
  for (int pl = 0; pl < report.chosen_type.rows(); ++pl)
    for (int pa = 0; pa < report.chosen_type.cols(); ++pa) {
      if (report.chosen_type(pl, pa) < 0) continue;
      doc["chosen_type"].push_back(
          {{"player", report.player_ids[pl]},
           {"line", report.path_line_ids[pa]},
           {"type", to_string(static_cast<FtrType>(report.chosen_type(pl, pa)))}});
    }

  doc["nash"] = {{"certified", report.nash.certified},
                 {"max_improvement", report.nash.max_improvement},
                 {"deviations_checked", report.nash.deviations_checked},
                 {"grid_points", report.nash.grid_points},
                 {"epsilon", report.nash.epsilon}};
  doc["fully_converged"] = report.fully_converged;

  doc["timings"] = nlohmann::json::array();
  for (const StageTiming& t : report.timings)
    doc["timings"].push_back({{"stage", t.stage}, {"seconds", t.seconds}});

  std::ofstream out(dir + "/summary.json");
  if (!out) throw IoError("cannot open " + dir + "/summary.json for writing");
  out << doc.dump(2) << '\n';
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

}  // namespace

void emit_metric_tables(const RunReport& report, const std::string& dir) {
  ensure_dir(dir);
  write_zeta(report, dir);
  write_fcp_rcp(report, dir);
  write_bounds(report, dir);
}

void emit_tables(const RunReport& report, const std::string& dir) {
  ensure_dir(dir);
  write_zeta(report, dir);
  write_fcp_rcp(report, dir);
  write_bounds(report, dir);
  write_state_matrix(report, dir, "table_profits.csv", report.state_obligation.profits,
                     report.state_option.profits);
  write_state_matrix(report, dir, "table_bids.csv", report.state_obligation.bids,
                     report.state_option.bids);
  write_state_matrix(report, dir, "table_ftrs.csv", report.state_obligation.awards,
                     report.state_option.awards);
  write_mcp(report, dir);
  write_summary(report, dir);

  std::ofstream sol(dir + "/solution.json");
  if (!sol) throw IoError("cannot open " + dir + "/solution.json for writing");
  sol << solution_to_json(report).dump(2) << '\n';
}

}  // namespace ftr

