#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <limits>

#include "ftr/errors.hpp"
#include "ftr/lp.hpp"

using ftr::lp::Problem;
using ftr::lp::Solution;
using ftr::lp::Status;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

Problem make(int m, int n) {
  Problem p;
  p.a = Eigen::MatrixXd::Zero(m, n);
  p.rhs = Eigen::VectorXd::Zero(m);
  p.cost = Eigen::VectorXd::Zero(n);
  p.lower = Eigen::VectorXd::Zero(n);
  p.upper = Eigen::VectorXd::Constant(n, kInf);
  return p;
}
}  // namespace

TEST_CASE("equality-constrained minimum picks the cheap variable") {
  // min 2a + b  s.t. a + b = 4, 0 <= a, b <= 3
  Problem p = make(1, 2);
  p.a << 1, 1;
  p.rhs << 4;
  p.cost << 2, 1;
  p.upper << 3, 3;
  Solution s = ftr::lp::solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.x[0] == doctest::Approx(1.0));
  CHECK(s.x[1] == doctest::Approx(3.0));
  CHECK(s.objective == doctest::Approx(5.0));
  // Marginal unit is a: dual of the balance row equals its cost.
  CHECK(s.row_duals[0] == doctest::Approx(2.0));
}

TEST_CASE("two-sided rows via bounded slacks") {
  // max x1 + x2 (min -) s.t. x1 + 2 x2 <= 4, x1, x2 in [0, 3]
  Problem p = make(1, 3);
  p.a << 1, 2, 1;  // slack column
  p.rhs << 4;
  p.cost << -1, -1, 0;
  p.upper << 3, 3, kInf;
  Solution s = ftr::lp::solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.objective == doctest::Approx(-3.5));
  CHECK(s.x[0] == doctest::Approx(3.0));
  CHECK(s.x[1] == doctest::Approx(0.5));
}

TEST_CASE("infeasible system is reported") {
  Problem p = make(2, 1);
  p.a << 1, 1;
  p.rhs << 1, 2;  // x = 1 and x = 2
  Solution s = ftr::lp::solve(p);
  CHECK(s.status == Status::infeasible);
}

TEST_CASE("unbounded direction is reported") {
  Problem p = make(1, 2);
  p.a << 1, -1;
  p.rhs << 0;
  p.cost << -1, 0;  // push x1 up forever along x1 = x2
  Solution s = ftr::lp::solve(p);
  CHECK(s.status == Status::unbounded);
}

TEST_CASE("negative lower bounds and upper-bound starts") {
  // min x subject to x + y = 0, x in [-5, 5], y in [-2, 2]
  Problem p = make(1, 2);
  p.a << 1, 1;
  p.rhs << 0;
  p.cost << 1, 0;
  p.lower << -5, -2;
  p.upper << 5, 2;
  Solution s = ftr::lp::solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.x[0] == doctest::Approx(-2.0));
  CHECK(s.x[1] == doctest::Approx(2.0));
}

TEST_CASE("duals price the resource on a transport-style instance") {
  // min c.x over two supply rows feeding one demand row.
  // s1 + s2 = 10 (demand), s1 <= 6, s2 <= 8 via bounds, costs 1 and 3.
  Problem p = make(1, 2);
  p.a << 1, 1;
  p.rhs << 10;
  p.cost << 1, 3;
  p.upper << 6, 8;
  Solution s = ftr::lp::solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.x[0] == doctest::Approx(6.0));
  CHECK(s.x[1] == doctest::Approx(4.0));
  CHECK(s.row_duals[0] == doctest::Approx(3.0));  // marginal supply is the dear one
  // Reduced cost of the cheap, capped variable is negative at its upper bound.
  CHECK(s.reduced_costs[0] == doctest::Approx(-2.0));
}

TEST_CASE("degenerate optimum is flagged and deterministic") {
  // Two identical-cost columns splitting one unit: alternate optima.
  Problem p = make(1, 2);
  p.a << 1, 1;
  p.rhs << 1;
  p.cost << 1, 1;
  p.upper << 1, 1;
  Solution a = ftr::lp::solve(p);
  Solution b = ftr::lp::solve(p);
  REQUIRE(a.status == Status::optimal);
  CHECK(a.degenerate);
  CHECK(a.x == b.x);  // bit-identical reruns
}

TEST_CASE("fixed columns are honored") {
  Problem p = make(1, 2);
  p.a << 1, 1;
  p.rhs << 3;
  p.cost << 0, 1;
  p.lower << 2, 0;
  p.upper << 2, 5;  // first column fixed at 2
  Solution s = ftr::lp::solve(p);
  REQUIRE(s.status == Status::optimal);
  CHECK(s.x[0] == doctest::Approx(2.0));
  CHECK(s.x[1] == doctest::Approx(1.0));
}

TEST_CASE("crossed or unbounded-both-ways columns are rejected") {
  Problem p = make(1, 1);
  p.a << 1;
  p.rhs << 0;
  p.lower << 1;
  p.upper << 0;
  CHECK_THROWS_AS(ftr::lp::solve(p), ftr::SolverError);
  p.lower << -kInf;
  p.upper << kInf;
  CHECK_THROWS_AS(ftr::lp::solve(p), ftr::SolverError);
}

TEST_CASE("moderately sized random feasible instances solve and satisfy KKT") {
  // Random equality systems around a known feasible interior point.
  std::srand(7);
  for (int trial = 0; trial < 25; ++trial) {
    const int m = 3 + trial % 4;
    const int n = m + 2 + trial % 5;
    Problem p = make(m, n);
    p.a = Eigen::MatrixXd::Random(m, n);
    Eigen::VectorXd x0 = Eigen::VectorXd::Random(n).cwiseAbs() + Eigen::VectorXd::Ones(n);
    p.rhs = p.a * x0;
    p.cost = Eigen::VectorXd::Random(n);
    p.lower = Eigen::VectorXd::Zero(n);
    p.upper = Eigen::VectorXd::Constant(n, 10.0);
    Solution s = ftr::lp::solve(p);
    REQUIRE(s.status == Status::optimal);
    CHECK(s.max_residual < 1e-8);
    // Dual feasibility at bounds.
    for (int j = 0; j < n; ++j) {
      const double d = s.reduced_costs[j];
      if (s.x[j] < 1e-9) CHECK(d > -1e-7);
      if (s.x[j] > 10.0 - 1e-9) CHECK(d < 1e-7);
    }
  }
}
