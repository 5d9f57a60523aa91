#include "ftr/lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ftr/errors.hpp"

namespace ftr::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarState { basic, at_lower, at_upper };

struct Tableau {
  Eigen::MatrixXd a;      // m x (n + m), structural then artificial columns
  Eigen::VectorXd rhs;    // m
  Eigen::VectorXd lower;  // n + m
  Eigen::VectorXd upper;  // n + m
  Eigen::VectorXd value;  // current point, n + m
  std::vector<VarState> state;
  std::vector<int> basis;  // m column indices
  int n = 0;               // structural count
  int m = 0;
};

// Recompute basic values from the nonbasic point; keeps drift at zero since
// the basis is refactored every iteration anyway at these sizes.
void refresh_basics(Tableau& t, const Eigen::PartialPivLU<Eigen::MatrixXd>& lu) {
  Eigen::VectorXd r = t.rhs;
  for (int j = 0; j < t.n + t.m; ++j) {
    if (t.state[j] != VarState::basic) r -= t.a.col(j) * t.value[j];
  }
  Eigen::VectorXd xb = lu.solve(r);
  for (int i = 0; i < t.m; ++i) t.value[t.basis[i]] = xb[i];
}

struct PhaseResult {
  bool optimal = false;
  bool unbounded = false;
  bool hit_limit = false;
  double objective = 0.0;
  Eigen::VectorXd duals;
  Eigen::VectorXd reduced;  // full length n + m
  int iterations = 0;
};

PhaseResult run_phase(Tableau& t, const Eigen::VectorXd& cost, const Options& opts,
                      int iter_budget) {
  PhaseResult out;
  const int total = t.n + t.m;
  bool bland = false;
  int degen_run = 0;

  for (int iter = 0; iter < iter_budget; ++iter) {
    Eigen::MatrixXd b(t.m, t.m);
    for (int i = 0; i < t.m; ++i) b.col(i) = t.a.col(t.basis[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    refresh_basics(t, lu);

    Eigen::VectorXd cb(t.m);
    for (int i = 0; i < t.m; ++i) cb[i] = cost[t.basis[i]];
    Eigen::VectorXd y = lu.transpose().solve(cb);

    // Price nonbasic columns.
    int enter = -1;
    double best = opts.opt_tol;
    Eigen::VectorXd d(total);
    for (int j = 0; j < total; ++j) {
      if (t.state[j] == VarState::basic) {
        d[j] = 0.0;
        continue;
      }
      d[j] = cost[j] - y.dot(t.a.col(j));
      if (t.lower[j] == t.upper[j]) continue;  // fixed column can never move
      const double viol = (t.state[j] == VarState::at_lower) ? -d[j] : d[j];
      if (bland) {
        if (viol > opts.opt_tol && enter < 0) enter = j;
      } else if (viol > best) {
        best = viol;
        enter = j;
      }
    }

    if (enter < 0) {
      out.optimal = true;
      out.duals = y;
      out.reduced = d;
      double obj = 0.0;
      for (int j = 0; j < total; ++j) obj += cost[j] * t.value[j];
      out.objective = obj;
      out.iterations = iter;
      return out;
    }

    const double sigma = (t.state[enter] == VarState::at_lower) ? 1.0 : -1.0;
    Eigen::VectorXd w = lu.solve(t.a.col(enter));

    // Ratio test: entering moves by sigma * tmax, basics move by -sigma * w.
    double tmax = t.upper[enter] - t.lower[enter];  // bound flip span
    int leave_pos = -1;     // position in basis, -1 means bound flip
    double leave_pivot = 0.0;
    for (int i = 0; i < t.m; ++i) {
      const double delta = sigma * w[i];
      const int col = t.basis[i];
      double cap = kInf;
      if (delta > opts.pivot_tol) {
        if (t.lower[col] > -kInf) cap = (t.value[col] - t.lower[col]) / delta;
      } else if (delta < -opts.pivot_tol) {
        if (t.upper[col] < kInf) cap = (t.upper[col] - t.value[col]) / (-delta);
      }
      if (cap < tmax - 1e-12 ||
          (cap < tmax + 1e-12 && leave_pos >= 0 &&
           std::abs(w[i]) > std::abs(leave_pivot))) {
        tmax = std::max(cap, 0.0);
        leave_pos = i;
        leave_pivot = w[i];
      }
    }

    if (std::isinf(tmax)) {
      out.unbounded = true;
      out.iterations = iter;
      return out;
    }

    if (tmax < 1e-11) {
      if (++degen_run > 40) bland = true;
    } else {
      degen_run = 0;
      bland = false;
    }

    if (leave_pos < 0) {
      // Bound flip: entering variable crosses to its other bound.
      t.value[enter] += sigma * tmax;
      t.state[enter] =
          (t.state[enter] == VarState::at_lower) ? VarState::at_upper : VarState::at_lower;
      continue;
    }

    const int leave_col = t.basis[leave_pos];
    const double delta = sigma * w[leave_pos];
    t.state[leave_col] = (delta > 0) ? VarState::at_lower : VarState::at_upper;
    t.value[leave_col] = (delta > 0) ? t.lower[leave_col] : t.upper[leave_col];
    t.value[enter] += sigma * tmax;
    t.state[enter] = VarState::basic;
    t.basis[leave_pos] = enter;
  }
  out.hit_limit = true;
  out.iterations = iter_budget;
  return out;
}

}  // namespace

Solution solve(const Problem& p, const Options& opts) {
  const int m = p.rows();
  const int n = p.cols();
  if (p.rhs.size() != m || p.cost.size() != n || p.lower.size() != n || p.upper.size() != n)
    throw SolverError("lp: inconsistent problem dimensions");
  for (int j = 0; j < n; ++j) {
    if (p.lower[j] > p.upper[j] + 1e-12) throw SolverError("lp: crossed bounds");
    if (std::isinf(p.lower[j]) && std::isinf(p.upper[j]))
      throw SolverError("lp: column with no finite bound");
  }

  Tableau t;
  t.n = n;
  t.m = m;
  t.a.resize(m, n + m);
  t.a.leftCols(n) = p.a;
  t.rhs = p.rhs;
  t.lower.resize(n + m);
  t.upper.resize(n + m);
  t.value.resize(n + m);
  t.lower.head(n) = p.lower;
  t.upper.head(n) = p.upper;
  t.state.assign(n + m, VarState::at_lower);

  // Start each structural at a finite bound, residual absorbed by artificials.
  Eigen::VectorXd r = p.rhs;
  for (int j = 0; j < n; ++j) {
    if (std::isfinite(p.lower[j])) {
      t.value[j] = p.lower[j];
      t.state[j] = VarState::at_lower;
    } else {
      t.value[j] = p.upper[j];
      t.state[j] = VarState::at_upper;
    }
    r -= p.a.col(j) * t.value[j];
  }
  t.basis.resize(m);
  for (int i = 0; i < m; ++i) {
    const int col = n + i;
    t.a.col(col).setZero();
    t.a(i, col) = (r[i] >= 0) ? 1.0 : -1.0;
    t.lower[col] = 0.0;
    t.upper[col] = kInf;
    t.value[col] = std::abs(r[i]);
    t.state[col] = VarState::basic;
    t.basis[i] = col;
  }

  Solution sol;

  // Phase 1: minimize artificial mass.
  Eigen::VectorXd phase1_cost = Eigen::VectorXd::Zero(n + m);
  phase1_cost.tail(m).setOnes();
  PhaseResult ph1 = run_phase(t, phase1_cost, opts, opts.max_iterations);
  if (ph1.hit_limit) {
    sol.status = Status::iteration_limit;
    sol.iterations = ph1.iterations;
    return sol;
  }
  const double feas_scale = 1.0 + p.rhs.cwiseAbs().sum();
  if (!ph1.optimal || ph1.objective > opts.feas_tol * feas_scale) {
    sol.status = Status::infeasible;
    sol.iterations = ph1.iterations;
    return sol;
  }

  // Phase 2: real costs; artificials pinned at zero. Any still-basic
  // artificial sits at value zero and the ratio test keeps it there.
  for (int i = 0; i < m; ++i) t.upper[n + i] = 0.0;
  Eigen::VectorXd phase2_cost = Eigen::VectorXd::Zero(n + m);
  phase2_cost.head(n) = p.cost;
  PhaseResult ph2 = run_phase(t, phase2_cost, opts, opts.max_iterations);
  sol.iterations = ph1.iterations + ph2.iterations;
  if (ph2.hit_limit) {
    sol.status = Status::iteration_limit;
    return sol;
  }
  if (ph2.unbounded) {
    sol.status = Status::unbounded;
    return sol;
  }

  sol.status = Status::optimal;
  sol.x = t.value.head(n);
  sol.objective = p.cost.dot(sol.x);
  sol.row_duals = ph2.duals;
  sol.reduced_costs = ph2.reduced.head(n);
  sol.max_residual = (p.a * sol.x - p.rhs).cwiseAbs().maxCoeff();

  // Degeneracy: a basic variable pinned to a bound, or a nonbasic movable
  // column with zero reduced cost, both mean the optimal basis is not unique.
  for (int i = 0; i < m && !sol.degenerate; ++i) {
    const int col = t.basis[i];
    if (col >= n) continue;
    if ((std::isfinite(t.lower[col]) && t.value[col] - t.lower[col] < 1e-7) ||
        (std::isfinite(t.upper[col]) && t.upper[col] - t.value[col] < 1e-7))
      sol.degenerate = true;
  }
  for (int j = 0; j < n && !sol.degenerate; ++j) {
    if (t.state[j] == VarState::basic || t.lower[j] == t.upper[j]) continue;
    if (std::abs(sol.reduced_costs[j]) < 1e-7) sol.degenerate = true;
  }
  return sol;
}

}  // namespace ftr::lp
