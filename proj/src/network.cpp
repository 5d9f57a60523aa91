#include "ftr/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <unordered_map>
#include <unordered_set>

#include "ftr/errors.hpp"
#include "ftr/lp.hpp"

namespace ftr {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kThetaBound = 1e3;  // angle variables never get near this

int find_index(const std::vector<int>& ids, int id) {
  auto it = std::find(ids.begin(), ids.end(), id);
  return it == ids.end() ? -1 : static_cast<int>(it - ids.begin());
}
}  // namespace

NetworkModel::NetworkModel(std::vector<int> buses, std::vector<Line> lines,
                           std::vector<Generator> generators, std::vector<Load> loads,
                           int slack_bus)
    : buses_(std::move(buses)),
      lines_(std::move(lines)),
      generators_(std::move(generators)),
      loads_(std::move(loads)),
      slack_bus_(slack_bus) {
  validate();
  slack_index_ = bus_index(slack_bus_);
}

int NetworkModel::bus_index(int bus_id) const {
  int idx = find_index(buses_, bus_id);
  if (idx < 0) throw TopologyError("unknown bus id " + std::to_string(bus_id));
  return idx;
}

int NetworkModel::line_index(int line_id) const {
  for (size_t i = 0; i < lines_.size(); ++i)
    if (lines_[i].id == line_id) return static_cast<int>(i);
  throw TopologyError("unknown line id " + std::to_string(line_id));
}

int NetworkModel::generator_index(int gen_id) const {
  for (size_t i = 0; i < generators_.size(); ++i)
    if (generators_[i].id == gen_id) return static_cast<int>(i);
  throw TopologyError("unknown generator id " + std::to_string(gen_id));
}

int NetworkModel::load_index(int load_id) const {
  for (size_t i = 0; i < loads_.size(); ++i)
    if (loads_[i].id == load_id) return static_cast<int>(i);
  throw TopologyError("unknown load id " + std::to_string(load_id));
}

Eigen::VectorXd NetworkModel::nominal_demand() const {
  Eigen::VectorXd d(load_count());
  for (int i = 0; i < load_count(); ++i) d[i] = loads_[i].demand;
  return d;
}

void NetworkModel::validate() const {
  if (buses_.empty()) throw TopologyError("network has no buses");
  std::unordered_set<int> seen;
  for (int b : buses_)
    if (!seen.insert(b).second) throw TopologyError("duplicate bus id " + std::to_string(b));

  for (const Line& l : lines_) {
    if (find_index(buses_, l.from) < 0 || find_index(buses_, l.to) < 0)
      throw TopologyError("line " + std::to_string(l.id) + " references unknown bus");
    if (l.from == l.to) throw TopologyError("line " + std::to_string(l.id) + " is a self-loop");
    if (l.reactance == 0.0)
      throw TopologyError("line " + std::to_string(l.id) + " has zero reactance");
    if (!(l.capacity > 0.0))
      throw TopologyError("line " + std::to_string(l.id) + " capacity must be positive");
  }
  for (const Generator& g : generators_) {
    if (find_index(buses_, g.bus) < 0)
      throw TopologyError("generator " + std::to_string(g.id) + " references unknown bus");
    if (g.p_min > g.p_max)
      throw TopologyError("generator " + std::to_string(g.id) + " has p_min > p_max");
  }
  for (const Load& d : loads_) {
    if (find_index(buses_, d.bus) < 0)
      throw TopologyError("load " + std::to_string(d.id) + " references unknown bus");
    if (d.demand < 0.0)
      throw TopologyError("load " + std::to_string(d.id) + " has negative demand");
  }
  if (find_index(buses_, slack_bus_) < 0)
    throw TopologyError("slack bus " + std::to_string(slack_bus_) + " not in bus set");

  // Connectivity over in-service lines.
  if (buses_.size() > 1) {
    std::unordered_map<int, std::vector<int>> adj;
    for (const Line& l : lines_) {
      adj[l.from].push_back(l.to);
      adj[l.to].push_back(l.from);
    }
    std::unordered_set<int> visited;
    std::queue<int> q;
    q.push(buses_[0]);
    visited.insert(buses_[0]);
    while (!q.empty()) {
      int b = q.front();
      q.pop();
      for (int nb : adj[b])
        if (visited.insert(nb).second) q.push(nb);
    }
    if (visited.size() != buses_.size()) throw TopologyError("network graph is disconnected");
  }
}

namespace {

double require_number(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key) || !obj[key].is_number())
    throw SchemaError(ctx + ": missing or non-numeric field '" + key + "'");
  return obj[key].get<double>();
}

int require_int(const nlohmann::json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key) || !obj[key].is_number_integer())
    throw SchemaError(ctx + ": missing or non-integer field '" + key + "'");
  return obj[key].get<int>();
}

}  // namespace

NetworkModel build_network(const nlohmann::json& doc) {
  if (!doc.is_object()) throw SchemaError("network document must be an object");
  for (const char* key : {"buses", "lines", "generators", "loads"})
    if (!doc.contains(key) || !doc[key].is_array())
      throw SchemaError(std::string("network document: missing array field '") + key + "'");

  std::vector<int> buses;
  for (const auto& b : doc["buses"]) {
    if (!b.is_number_integer()) throw SchemaError("buses must be integer ids");
    buses.push_back(b.get<int>());
  }

  std::vector<Line> lines;
  for (const auto& j : doc["lines"]) {
    Line l;
    l.id = require_int(j, "id", "line");
    l.from = require_int(j, "from", "line");
    l.to = require_int(j, "to", "line");
    l.reactance = require_number(j, "reactance", "line");
    l.capacity = require_number(j, "capacity", "line");
    lines.push_back(l);
  }

  std::vector<Generator> gens;
  for (const auto& j : doc["generators"]) {
    Generator g;
    g.id = require_int(j, "id", "generator");
    g.bus = require_int(j, "bus", "generator");
    g.cost = require_number(j, "cost", "generator");
    g.p_min = j.contains("p_min") ? require_number(j, "p_min", "generator") : 0.0;
    g.p_max = require_number(j, "p_max", "generator");
    gens.push_back(g);
  }

  std::vector<Load> loads;
  for (const auto& j : doc["loads"]) {
    Load d;
    d.id = require_int(j, "id", "load");
    d.bus = require_int(j, "bus", "load");
    d.demand = require_number(j, "demand", "load");
    loads.push_back(d);
  }

  int slack;
  if (doc.contains("slack_bus")) {
    if (!doc["slack_bus"].is_number_integer()) throw SchemaError("slack_bus must be an integer");
    slack = doc["slack_bus"].get<int>();
  } else {
    // Default: lowest-index generator bus.
    if (gens.empty()) throw SchemaError("network needs a slack_bus or at least one generator");
    slack = std::min_element(gens.begin(), gens.end(), [](const auto& a, const auto& b) {
              return a.bus < b.bus;
            })->bus;
  }

  return NetworkModel(std::move(buses), std::move(lines), std::move(gens), std::move(loads),
                      slack);
}

SensitivityMatrices compute_shift_factors(const NetworkModel& net) {
  const int nb = net.bus_count();
  const int nl = net.line_count();
  const int sl = net.slack_bus_index();

  // Reduced bus index: all buses except slack.
  std::vector<int> red(nb, -1);
  int k = 0;
  for (int b = 0; b < nb; ++b)
    if (b != sl) red[b] = k++;

  Eigen::MatrixXd bred = Eigen::MatrixXd::Zero(nb - 1, nb - 1);
  Eigen::MatrixXd bf = Eigen::MatrixXd::Zero(nl, nb - 1);
  for (int l = 0; l < nl; ++l) {
    const Line& line = net.lines()[l];
    const int f = net.bus_index(line.from);
    const int t = net.bus_index(line.to);
    const double y = 1.0 / line.reactance;
    if (red[f] >= 0) {
      bred(red[f], red[f]) += y;
      bf(l, red[f]) += y;
    }
    if (red[t] >= 0) {
      bred(red[t], red[t]) += y;
      bf(l, red[t]) -= y;
    }
    if (red[f] >= 0 && red[t] >= 0) {
      bred(red[f], red[t]) -= y;
      bred(red[t], red[f]) -= y;
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(bred);
  if (nb > 1 && !lu.isInvertible())
    throw SingularNetworkError("reduced susceptance matrix is singular");

  SensitivityMatrices sens;
  sens.shift = Eigen::MatrixXd::Zero(nl, nb);
  if (nb > 1) {
    // A = Bf * Bred^{-1}, expanded with a zero slack column.
    Eigen::MatrixXd ared = lu.solve(bf.transpose()).transpose();
    for (int b = 0; b < nb; ++b)
      if (b != sl) sens.shift.col(b) = ared.col(red[b]);
  }
  return sens;
}

double ptdf(const SensitivityMatrices& sens, int line_idx, int src_bus_idx, int sink_bus_idx) {
  return sens.shift(line_idx, src_bus_idx) - sens.shift(line_idx, sink_bus_idx);
}

DispatchEstimate run_dcopf(const NetworkModel& net, const Eigen::VectorXd& demand) {
  const int ng = net.generator_count();
  const int nl = net.line_count();
  const int nb = net.bus_count();
  if (demand.size() != net.load_count())
    throw InfeasibleDispatchError("demand vector size mismatch");

  double total_demand = demand.sum();
  double total_cap = 0.0;
  for (const Generator& g : net.generators()) total_cap += g.p_max;
  if (total_demand > total_cap + 1e-9)
    throw InfeasibleDispatchError("total demand exceeds generation capability");

  // Columns: p_g (ng) | theta (nb-1, slack removed) | f_l (nl).
  const int sl = net.slack_bus_index();
  std::vector<int> red(nb, -1);
  int k = 0;
  for (int b = 0; b < nb; ++b)
    if (b != sl) red[b] = k++;
  const int n = ng + (nb - 1) + nl;
  const int theta0 = ng;
  const int flow0 = ng + nb - 1;

  // Rows: flow definitions (nl) then bus balances (nb).
  lp::Problem p;
  p.a = Eigen::MatrixXd::Zero(nl + nb, n);
  p.rhs = Eigen::VectorXd::Zero(nl + nb);
  p.cost = Eigen::VectorXd::Zero(n);
  p.lower = Eigen::VectorXd::Zero(n);
  p.upper = Eigen::VectorXd::Zero(n);

  for (int g = 0; g < ng; ++g) {
    p.cost[g] = net.generators()[g].cost;
    p.lower[g] = net.generators()[g].p_min;
    p.upper[g] = net.generators()[g].p_max;
  }
  for (int b = 0; b < nb - 1; ++b) {
    p.lower[theta0 + b] = -kThetaBound;
    p.upper[theta0 + b] = kThetaBound;
  }
  for (int l = 0; l < nl; ++l) {
    p.lower[flow0 + l] = -net.lines()[l].capacity;
    p.upper[flow0 + l] = net.lines()[l].capacity;
  }

  for (int l = 0; l < nl; ++l) {
    const Line& line = net.lines()[l];
    const double y = 1.0 / line.reactance;
    const int f = net.bus_index(line.from);
    const int t = net.bus_index(line.to);
    p.a(l, flow0 + l) = 1.0;
    if (red[f] >= 0) p.a(l, theta0 + red[f]) -= y;
    if (red[t] >= 0) p.a(l, theta0 + red[t]) += y;
  }
  const int bal0 = nl;
  for (int g = 0; g < ng; ++g) p.a(bal0 + net.bus_index(net.generators()[g].bus), g) += 1.0;
  for (int l = 0; l < nl; ++l) {
    const Line& line = net.lines()[l];
    p.a(bal0 + net.bus_index(line.from), flow0 + l) -= 1.0;
    p.a(bal0 + net.bus_index(line.to), flow0 + l) += 1.0;
  }
  for (int d = 0; d < net.load_count(); ++d)
    p.rhs[bal0 + net.bus_index(net.loads()[d].bus)] += demand[d];

  lp::Solution s = lp::solve(p);
  if (s.status == lp::Status::infeasible)
    throw InfeasibleDispatchError("no feasible dispatch under line limits");
  if (s.status == lp::Status::unbounded)
    throw UnboundedError("dispatch problem is unbounded; check cost data");
  if (s.status != lp::Status::optimal) throw SolverError("dispatch LP did not converge");

  DispatchEstimate out;
  out.gen_output = s.x.head(ng);
  out.line_flow = s.x.segment(flow0, nl);
  out.nodal_price = s.row_duals.segment(bal0, nb);
  out.total_cost = s.objective;
  out.degenerate = s.degenerate;

  for (int b = 0; b < nb - 1; ++b)
    if (std::abs(s.x[theta0 + b]) > kThetaBound * 0.99)
      throw SolverError("angle variable at artificial bound; network data is ill-scaled");
  return out;
}

Path make_path(const NetworkModel& net, int line_idx, double sign) {
  const Line& line = net.lines()[line_idx];
  Path p;
  p.line_idx = line_idx;
  p.sign = sign;
  p.source_bus_idx = net.bus_index(sign >= 0 ? line.from : line.to);
  p.sink_bus_idx = net.bus_index(sign >= 0 ? line.to : line.from);
  return p;
}

double path_spread(const DispatchEstimate& dispatch, const Path& path) {
  return dispatch.nodal_price[path.sink_bus_idx] - dispatch.nodal_price[path.source_bus_idx];
}

double path_flow(const DispatchEstimate& dispatch, const Path& path) {
  return path.sign * dispatch.line_flow[path.line_idx];
}

double slack_distribution_factor(const NetworkModel& net, const SensitivityMatrices& sens,
                                 const DispatchEstimate& dispatch, int line_idx) {
  const double total = dispatch.gen_output.sum();
  if (!(total > 0.0)) throw ZeroDispatchError("total dispatched output is not positive");
  double acc = dispatch.line_flow[line_idx];
  for (int g = 0; g < net.generator_count(); ++g) {
    const int b = net.bus_index(net.generators()[g].bus);
    if (b == net.slack_bus_index()) continue;
    acc -= sens.shift(line_idx, b) * dispatch.gen_output[g];
  }
  return acc / total;
}

double update_slack_factor(const NetworkModel& net, const SensitivityMatrices& sens,
                           const DispatchEstimate& dispatch, int line_idx, int gen_idx,
                           int load_idx, double delta_p) {
  const double total = dispatch.gen_output.sum();
  if (!(total > 0.0)) throw ZeroDispatchError("total dispatched output is not positive");

  const int jb = net.bus_index(net.generators()[gen_idx].bus);
  const int db = net.bus_index(net.loads()[load_idx].bus);
  const double a_j = sens.shift(line_idx, jb);
  const double a_d = sens.shift(line_idx, db);
  const double d_sl = slack_distribution_factor(net, sens, dispatch, line_idx);
  const double flow = dispatch.line_flow[line_idx];
  const double cap = net.lines()[line_idx].capacity;
  const double incr = (a_j - a_d) * delta_p;

  if (incr - (cap - flow) < 0.0) {
    return (d_sl * total - a_d * delta_p) / (total + delta_p);
  }
  // Incremental flow would exceed the limit: flow pinned at capacity.
  return (d_sl * total + (cap - flow - a_j * delta_p)) / (total + delta_p);
}

double distribution_factor(const NetworkModel& net, const SensitivityMatrices& sens,
                           const DispatchEstimate& dispatch, int gen_idx, int line_idx) {
  const int b = net.bus_index(net.generators()[gen_idx].bus);
  return slack_distribution_factor(net, sens, dispatch, line_idx) + sens.shift(line_idx, b);
}

void compute_distribution_factors(const NetworkModel& net, SensitivityMatrices& sens,
                                  const DispatchEstimate& dispatch) {
  const int nl = net.line_count();
  const int ng = net.generator_count();
  sens.slack_factor.resize(nl);
  sens.dist.resize(nl, ng);
  for (int l = 0; l < nl; ++l) {
    sens.slack_factor[l] = slack_distribution_factor(net, sens, dispatch, l);
    for (int g = 0; g < ng; ++g) {
      const int b = net.bus_index(net.generators()[g].bus);
      sens.dist(l, g) = sens.slack_factor[l] + sens.shift(l, b);
    }
  }
  sens.has_distribution = true;
}

}  // namespace ftr
