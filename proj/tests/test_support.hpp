#pragma once

// Shared builders for unit and acceptance tests: tiny handwritten networks,
// a randomized small-network generator, and an exact brute-force clearing
// oracle for small auction instances.

#include <random>
#include <vector>

#include "ftr/clearing.hpp"
#include "ftr/network.hpp"

namespace ftr::testing {

/// One generator at bus 1 feeding one load at bus 2 over a single line.
inline NetworkModel two_bus(double line_cap = 100.0, double gen_cost = 10.0) {
  return NetworkModel({1, 2}, {{1, 1, 2, 0.1, line_cap}},
                      {{1, 1, gen_cost, 0.0, 200.0}}, {{1, 2, 50.0}}, 1);
}

/// Two generators with distinct costs; congestion appears when the line
/// capacity binds and the sink generator becomes marginal.
inline NetworkModel two_bus_two_gen(double line_cap) {
  return NetworkModel({1, 2}, {{1, 1, 2, 0.1, line_cap}},
                      {{1, 1, 10.0, 0.0, 200.0}, {2, 2, 30.0, 0.0, 200.0}},
                      {{1, 2, 50.0}}, 1);
}

/// Equal-reactance triangle; the classic 2/3 / 1/3 PTDF split.
inline NetworkModel triangle(double cap = 100.0) {
  return NetworkModel({1, 2, 3},
                      {{1, 1, 2, 0.1, cap}, {2, 1, 3, 0.1, cap}, {3, 2, 3, 0.1, cap}},
                      {{1, 1, 10.0, 0.0, 100.0}, {2, 2, 20.0, 0.0, 100.0}},
                      {{1, 3, 30.0}}, 1);
}

/// Random connected network with 3-8 buses, 2-4 generators and 1-4 loads.
/// Demands are kept well under capability so the base dispatch is feasible
/// for the +-10% deviation re-solves too.
inline NetworkModel random_network(std::mt19937& rng) {
  std::uniform_int_distribution<int> nb_dist(3, 8);
  const int nb = nb_dist(rng);
  std::vector<int> buses;
  for (int b = 1; b <= nb; ++b) buses.push_back(b);

  std::uniform_real_distribution<double> x_dist(0.05, 0.3);
  std::uniform_real_distribution<double> cap_dist(40.0, 140.0);
  std::vector<Line> lines;
  int line_id = 1;
  for (int b = 2; b <= nb; ++b) {
    std::uniform_int_distribution<int> parent(1, b - 1);
    lines.push_back({line_id++, parent(rng), b, x_dist(rng), cap_dist(rng)});
  }
  std::uniform_int_distribution<int> extra_dist(1, 3);
  const int extras = extra_dist(rng);
  for (int e = 0; e < extras; ++e) {
    std::uniform_int_distribution<int> pick(1, nb);
    int f = pick(rng), t = pick(rng);
    if (f == t) continue;
    lines.push_back({line_id++, f, t, x_dist(rng), cap_dist(rng)});
  }

  std::uniform_int_distribution<int> ng_dist(2, 4);
  const int ng = std::min(ng_dist(rng), nb);
  std::vector<int> gen_buses(buses);
  std::shuffle(gen_buses.begin(), gen_buses.end(), rng);
  std::uniform_real_distribution<double> cost_dist(10.0, 50.0);
  std::uniform_real_distribution<double> pmax_dist(40.0, 120.0);
  std::vector<Generator> gens;
  for (int g = 0; g < ng; ++g)
    gens.push_back({g + 1, gen_buses[g], cost_dist(rng), 0.0, pmax_dist(rng)});

  std::uniform_int_distribution<int> nd_dist(1, 4);
  const int nd = std::min(nd_dist(rng), nb);
  std::vector<int> load_buses(buses);
  std::shuffle(load_buses.begin(), load_buses.end(), rng);
  std::uniform_real_distribution<double> dem_dist(4.0, 18.0);
  std::vector<Load> loads;
  for (int d = 0; d < nd; ++d) loads.push_back({d + 1, load_buses[d], dem_dist(rng)});

  return NetworkModel(buses, lines, gens, loads, gens.front().bus);
}

struct BruteForceClearing {
  bool feasible = false;
  double revenue = 0.0;
  Eigen::VectorXd award;
};

/// Exact oracle for small instances: the optimum of a bounded feasible LP
/// sits on a vertex, so enumerate every square subsystem of active
/// constraints and keep the feasible point with the best revenue.
inline BruteForceClearing brute_force_clearing(const ClearingInstance& inst) {
  const int n = static_cast<int>(inst.offers.size());
  const int nl = static_cast<int>(inst.line_cap.size());

  // Effective impact rows (options only push, never relieve).
  Eigen::MatrixXd eff(n, nl);
  for (int i = 0; i < n; ++i)
    for (int l = 0; l < nl; ++l)
      eff(i, l) = inst.offers[i].type == FtrType::option
                      ? std::max(0.0, inst.impact(i, l))
                      : inst.impact(i, l);

  // Constraint rows as a q = b pairs (equality when active).
  std::vector<Eigen::VectorXd> rows;
  std::vector<double> rhs;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[i] = 1.0;
    rows.push_back(e);
    rhs.push_back(inst.offers[i].q_min);
    rows.push_back(e);
    rhs.push_back(inst.offers[i].q_max);
  }
  for (int l = 0; l < nl; ++l) {
    rows.push_back(eff.col(l));
    rhs.push_back(inst.line_cap[l]);
    rows.push_back(eff.col(l));
    rhs.push_back(-inst.line_cap[l]);
  }

  auto feasible_point = [&](const Eigen::VectorXd& q) {
    for (int i = 0; i < n; ++i)
      if (q[i] < inst.offers[i].q_min - 1e-7 || q[i] > inst.offers[i].q_max + 1e-7)
        return false;
    for (int l = 0; l < nl; ++l) {
      const double f = eff.col(l).dot(q);
      if (f > inst.line_cap[l] + 1e-7 || f < -inst.line_cap[l] - 1e-7) return false;
    }
    return true;
  };

  BruteForceClearing best;
  const int nr = static_cast<int>(rows.size());
  // Iterate all n-combinations of constraint rows.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  while (true) {
    Eigen::MatrixXd a(n, n);
    Eigen::VectorXd b(n);
    for (int i = 0; i < n; ++i) {
      a.row(i) = rows[idx[i]].transpose();
      b[i] = rhs[idx[i]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    if (lu.isInvertible()) {
      Eigen::VectorXd q = lu.solve(b);
      if (feasible_point(q)) {
        double rev = 0.0;
        for (int i = 0; i < n; ++i) rev += inst.offers[i].price * q[i];
        if (!best.feasible || rev > best.revenue) {
          best.feasible = true;
          best.revenue = rev;
          best.award = q;
        }
      }
    }
    // next combination
    int k = n - 1;
    while (k >= 0 && idx[k] == nr - n + k) --k;
    if (k < 0) break;
    ++idx[k];
    for (int j = k + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
  }
  return best;
}

}  // namespace ftr::testing
