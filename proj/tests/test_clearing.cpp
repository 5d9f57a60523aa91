#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <random>

#include "ftr/clearing.hpp"
#include "ftr/errors.hpp"
#include "ftr/network.hpp"
#include "test_support.hpp"

using namespace ftr;

namespace {

ClearingInstance one_line_pair(FtrType type, double q_max_a = 25.0) {
  ClearingInstance inst;
  inst.line_cap = Eigen::VectorXd::Constant(1, 10.0);
  inst.line_ids = {1};
  inst.offers.push_back({1, 0, type, 5.0, 0.0, q_max_a});
  inst.offers.push_back({2, 1, type, 1.0, 0.0, 8.0});
  inst.impact.resize(2, 1);
  inst.impact << 1.0, -1.0;  // offer 2 counter-flows the line
  return inst;
}

}  // namespace

TEST_CASE("impact coefficients: radial path, reversal, triangle split") {
  NetworkModel radial = testing::two_bus();
  SensitivityMatrices rs = compute_shift_factors(radial);
  Path fwd = make_path(radial, 0, 1.0);
  Path rev = make_path(radial, 0, -1.0);
  Eigen::MatrixXd m = build_impact_coefficients(radial, rs, {fwd, rev});
  CHECK(m(0, 0) == doctest::Approx(1.0));
  CHECK(m(1, 0) == doctest::Approx(-1.0));

  NetworkModel tri = testing::triangle();
  SensitivityMatrices ts = compute_shift_factors(tri);
  Path p23 = make_path(tri, tri.line_index(3), 1.0);  // bus 2 -> bus 3
  Eigen::MatrixXd mt = build_impact_coefficients(tri, ts, {p23});
  CHECK(mt(0, tri.line_index(3)) == doctest::Approx(2.0 / 3.0));
  CHECK(mt(0, tri.line_index(1)) == doctest::Approx(-1.0 / 3.0));
  CHECK(mt(0, tri.line_index(2)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("single offer with ample capacity clears at its maximum") {
  ClearingInstance inst;
  inst.line_cap = Eigen::VectorXd::Constant(1, 100.0);
  inst.line_ids = {1};
  inst.offers.push_back({1, 0, FtrType::obligation, 3.0, 0.0, 12.0});
  inst.impact.resize(1, 1);
  inst.impact << 1.0;
  ClearingOutcome out = clear_market(inst);
  CHECK(out.award[0] == doctest::Approx(12.0));
  CHECK(out.objective == doctest::Approx(36.0));
  CHECK(out.mu_line[0] == doctest::Approx(0.0));
  CHECK_FALSE(out.binding[0]);
}

TEST_CASE("counter-flow obligation enables extra award; hand LP oracle") {
  ClearingInstance inst = one_line_pair(FtrType::obligation);
  ClearingOutcome out = clear_market(inst);
  // By hand: a <= 10 + b, b <= 8, so a = 18, b = 8; revenue 98; line tight.
  CHECK(out.award[0] == doctest::Approx(18.0));
  CHECK(out.award[1] == doctest::Approx(8.0));
  CHECK(out.objective == doctest::Approx(98.0));
  CHECK(out.binding[0]);
  // Interior offer 1 pins the line dual at its bid.
  CHECK(out.mu_line[0] == doctest::Approx(5.0));
  // Offer 2 at its cap: mu+ = rho - m*mu = 1 - (-1)*5 = 6.
  CHECK(out.mu_plus[1] == doctest::Approx(6.0));
  CHECK(out.mu_minus[1] == doctest::Approx(0.0));
}

TEST_CASE("as options the counter-flow relief vanishes and awards drop") {
  ClearingOutcome obl = clear_market(one_line_pair(FtrType::obligation));
  ClearingOutcome opt = clear_market(one_line_pair(FtrType::option));
  CHECK(opt.award[0] == doctest::Approx(10.0));  // capped by the line alone
  CHECK(opt.award[1] == doctest::Approx(8.0));   // no longer loads the line
  CHECK(opt.objective == doctest::Approx(58.0));
  for (int i = 0; i < 2; ++i) CHECK(opt.award[i] <= obl.award[i] + 1e-9);
}

TEST_CASE("zero-bid offers get nothing when positive bids compete for scarce capacity") {
  ClearingInstance inst;
  inst.line_cap = Eigen::VectorXd::Constant(1, 10.0);
  inst.line_ids = {1};
  inst.offers.push_back({1, 0, FtrType::obligation, 0.0, 0.0, 10.0});
  inst.offers.push_back({2, 0, FtrType::obligation, 2.0, 0.0, 10.0});
  inst.impact.resize(2, 1);
  inst.impact << 1.0, 1.0;
  ClearingOutcome out = clear_market(inst);
  CHECK(out.award[0] == doctest::Approx(0.0));
  CHECK(out.award[1] == doctest::Approx(10.0));
}

TEST_CASE("unsatisfiable minimum quantities raise") {
  ClearingInstance inst;
  inst.line_cap = Eigen::VectorXd::Constant(1, 10.0);
  inst.line_ids = {1};
  inst.offers.push_back({1, 0, FtrType::obligation, 1.0, 20.0, 30.0});
  inst.impact.resize(1, 1);
  inst.impact << 1.0;
  CHECK_THROWS_AS(clear_market(inst), InfeasibleInstanceError);

  inst.offers[0].q_min = 5.0;
  inst.offers[0].q_max = 2.0;
  CHECK_THROWS_AS(clear_market(inst), InfeasibleInstanceError);
}

TEST_CASE("complementary slackness and brute-force agreement on random instances") {
  std::mt19937 rng(419);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int no = 1 + trial % 3;
    const int nl = 1 + trial % 2;
    ClearingInstance inst;
    inst.line_cap.resize(nl);
    for (int l = 0; l < nl; ++l) {
      inst.line_cap[l] = 4.0 + 10.0 * u(rng);
      inst.line_ids.push_back(l + 1);
    }
    inst.impact.resize(no, nl);
    for (int i = 0; i < no; ++i) {
      Offer o;
      o.player = i + 1;
      o.path = i;
      o.type = u(rng) < 0.5 ? FtrType::obligation : FtrType::option;
      o.price = 0.5 + 6.0 * u(rng);
      o.q_min = 0.0;
      o.q_max = 2.0 + 12.0 * u(rng);
      inst.offers.push_back(o);
      for (int l = 0; l < nl; ++l) inst.impact(i, l) = -1.0 + 2.0 * u(rng);
    }

    ClearingOutcome out = clear_market(inst);
    testing::BruteForceClearing oracle = testing::brute_force_clearing(inst);
    REQUIRE(oracle.feasible);
    CHECK(out.objective == doctest::Approx(oracle.revenue).epsilon(1e-6));

    for (int l = 0; l < nl; ++l)
      if (std::abs(out.mu_line[l]) > 1e-7) CHECK(out.binding[l]);

    // Stationarity identity per offer from the extracted multipliers.
    for (int i = 0; i < no; ++i) {
      double m_mu = 0.0;
      for (int l = 0; l < nl; ++l) {
        const double m = inst.offers[i].type == FtrType::option
                             ? std::max(0.0, inst.impact(i, l))
                             : inst.impact(i, l);
        m_mu += m * out.mu_line[l];
      }
      CHECK(std::abs(inst.offers[i].price - m_mu - out.mu_plus[i] + out.mu_minus[i]) < 1e-7);
    }
  }
}

TEST_CASE("reruns are bit-identical") {
  ClearingInstance inst = one_line_pair(FtrType::obligation);
  ClearingOutcome a = clear_market(inst);
  ClearingOutcome b = clear_market(inst);
  CHECK(a.award == b.award);
  CHECK(a.mu_line == b.mu_line);
}

TEST_CASE("instance JSON round-trip preserves the fields") {
  ClearingInstance inst = one_line_pair(FtrType::option);
  ClearingInstance back = parse_clearing_instance(to_json(inst));
  REQUIRE(back.offers.size() == inst.offers.size());
  for (size_t i = 0; i < inst.offers.size(); ++i) {
    CHECK(back.offers[i].price == inst.offers[i].price);
    CHECK(back.offers[i].q_max == inst.offers[i].q_max);
    CHECK(back.offers[i].type == inst.offers[i].type);
  }
  CHECK(back.impact == inst.impact);
  CHECK(back.line_cap == inst.line_cap);

  nlohmann::json bad = {{"lines", nlohmann::json::array()}};
  CHECK_THROWS_AS(parse_clearing_instance(bad), SchemaError);
}
