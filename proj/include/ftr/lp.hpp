#pragma once

#include <Eigen/Dense>

namespace ftr::lp {

enum class Status { optimal, infeasible, unbounded, iteration_limit };

/// Linear program in computational form:
///   minimize cost . x   subject to   a x = rhs,  lower <= x <= upper.
/// Inequalities are expected to be rewritten with bounded slack columns by
/// the caller. Every column must have at least one finite bound.
struct Problem {
  Eigen::MatrixXd a;
  Eigen::VectorXd rhs;
  Eigen::VectorXd cost;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  int rows() const { return static_cast<int>(a.rows()); }
  int cols() const { return static_cast<int>(a.cols()); }
};

struct Options {
  int max_iterations = 20000;
  double feas_tol = 1e-9;   ///< phase-1 residual acceptance, scaled by |rhs|
  double opt_tol = 1e-9;    ///< reduced-cost tolerance
  double pivot_tol = 1e-10; ///< smallest usable ratio-test pivot
};

struct Solution {
  Status status = Status::infeasible;
  Eigen::VectorXd x;             ///< structural variables
  double objective = 0.0;
  Eigen::VectorXd row_duals;     ///< y: marginal objective change per unit rhs
  Eigen::VectorXd reduced_costs; ///< cost - a^T y, structural columns
  bool degenerate = false;       ///< a tied basis exists (primal or dual)
  int iterations = 0;
  double max_residual = 0.0;     ///< ||a x - rhs||_inf at the returned point
};

/// Dense bounded-variable two-phase primal simplex. Deterministic: Dantzig
/// pricing with lowest-index tie-breaks, switching to Bland's rule after a
/// run of degenerate steps, so identical inputs give identical bases.
Solution solve(const Problem& problem, const Options& opts = {});

}  // namespace ftr::lp
