#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <string>

#include "arrowip/grid.hpp"
#include "arrowip/ipm.hpp"
#include "support.hpp"

using namespace arrowip;
using namespace arrowip::grid;

namespace {

std::string data(const std::string& name) { return std::string(ARROWIP_DATA_DIR) + "/" + name; }

const char* kTwoBus = R"(BASEMVA 100
BUS
1 ref 0  0  0 0 0.95 1.05
2 PQ  50 10 0 0 0.95 1.05
BRANCH
1 2 0 0.1 0 0
GEN
1 0 200 -100 100 0.01 10 0
)";

const char* kStorageCase = R"(BASEMVA 100
PERIODS 3
BUS
1 ref 0  0  0 0 0.95 1.05
2 PQ  50 10 0 0 0.95 1.05
BRANCH
1 2 0.01 0.1 0 0
GEN
1 0 200 -100 100 0.01 10 0
STORAGE
2 1 20 10 10 -5 5 0.95 0.9 5
DEMAND
1 0.8
2 1.2
3 1.0
)";

Eigen::MatrixXcd dense(const Eigen::SparseMatrix<std::complex<double>>& m) {
  return Eigen::MatrixXcd(m);
}

Eigen::VectorXd random_multipliers(std::mt19937& rng, int n) {
  return testing::random_vector(rng, n, 2.0);
}

}  // namespace

TEST_CASE("case parsing") {
  SUBCASE("two-bus case") {
    const GridCase c = parse_case(kTwoBus);
    CHECK(c.buses.size() == 2);
    CHECK(c.branches.size() == 1);
    CHECK(c.generators.size() == 1);
    CHECK(c.reference_bus() == 0);
    CHECK(c.generators[0].cost == std::vector<double>{0.01, 10, 0});
  }
  SUBCASE("nine-bus file") {
    const GridCase c = load_case(data("case9.case"));
    CHECK(c.buses.size() == 9);
    CHECK(c.branches.size() == 9);
    CHECK(c.generators.size() == 3);
    CHECK(c.contingencies.size() == 4);
  }
  SUBCASE("missing reference bus") {
    std::string text = kTwoBus;
    text.replace(text.find("ref"), 3, "PV ");
    CHECK_THROWS_WITH_AS(parse_case(text), doctest::Contains("reference bus"), CaseError);
  }
  SUBCASE("syntax error reports its line") {
    std::string text = kTwoBus;
    text.replace(text.find("0.1 0 0"), 3, "abc");
    try {
      parse_case(text);
      FAIL("no error raised");
    } catch (const CaseError& e) {
      CHECK(e.line() == 6);
    }
  }
  SUBCASE("wrong column count") {
    CHECK_THROWS_AS(parse_case("BUS\n1 ref 0 0\n"), CaseError);
  }
  SUBCASE("unknown file") { CHECK_THROWS(load_case(data("missing.case"))); }
  SUBCASE("demand profile repeats") {
    const GridCase c = parse_case(kStorageCase);
    Eigen::VectorXd pd, qd;
    c.demand(1, pd, qd);
    CHECK(pd[1] == doctest::Approx(60.0));
    c.demand(4, pd, qd);
    CHECK(pd[1] == doctest::Approx(60.0));
  }
}

TEST_CASE("admittance matrix") {
  const GridCase c = parse_case(kTwoBus);
  const AdmittanceMatrix y = admittance(c);
  using cd = std::complex<double>;
  Eigen::MatrixXcd expected(2, 2);
  expected << cd(0, -10), cd(0, 10), cd(0, 10), cd(0, -10);
  CHECK((dense(y.ybus) - expected).norm() <= 1e-12);

  CHECK_THROWS_AS(admittance(c, Contingency{Contingency::Kind::branch, 0}), ConnectivityError);

  GridCase tapped = c;
  tapped.branches[0].tap = 1.0;
  CHECK((dense(admittance(tapped).ybus) - expected).norm() == 0.0);

  tapped.branches[0].tap = 2.0;
  const Eigen::MatrixXcd t = dense(admittance(tapped).ybus);
  CHECK(std::abs(t(0, 0) - cd(0, -2.5)) <= 1e-12);
  CHECK(std::abs(t(0, 1) - cd(0, 5)) <= 1e-12);
  CHECK(std::abs(t(1, 1) - cd(0, -10)) <= 1e-12);
}

TEST_CASE("power balance at a hand-balanced point") {
  const GridCase c = parse_case(kTwoBus);
  const GridModel m = build_opf(c);
  const InstanceIndex& idx = m.instances[0];
  // bus 2 receives 0.5 + j0.1 pu over x = 0.1 with v1 = 1
  const double u = (0.98 + std::sqrt(0.95)) / 2.0;
  const double v2 = std::sqrt(u), delta = std::asin(-0.05 / v2);
  Eigen::VectorXd x = m.problem.x_start;
  x[idx.v[0]] = 1.0;
  x[idx.v[1]] = v2;
  if (idx.theta[0] >= 0) x[idx.theta[0]] = 0.0;
  x[idx.theta[1]] = delta;
  x[idx.p[0]] = 0.5;
  x[idx.q[0]] = 10.0 * (0.99 - u);
  const Evaluation ev = eval_functions(m.problem, x);
  REQUIRE(ev.status == EvalStatus::ok);
  CHECK(ev.c_eq.lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("model derivatives match finite differences") {
  std::mt19937 rng(11);
  const GridCase c9 = load_case(data("case9.case"));
  const GridCase c30 = load_case(data("case30s.case"));
  const std::vector<std::pair<const char*, GridModel>> models = {
      {"opf case9", build_opf(c9)},
      {"scopf case9", build_scopf(c9, c9.contingencies)},
      {"mpopf storage", build_mpopf(parse_case(kStorageCase), 3)},
      {"mpopf case30s", build_mpopf(c30, 2, {.ramp_limits = true})},
  };
  for (const auto& [name, m] : models) {
    CAPTURE(name);
    for (int trial = 0; trial < 2; ++trial) {
      const Eigen::VectorXd x = testing::random_interior(rng, m.problem);
      const auto check =
          testing::check_derivatives(m.problem, x, random_multipliers(rng, m.problem.n_e),
                                     random_multipliers(rng, m.problem.n_i));
      CHECK(check.worst() <= 1e-5);
    }
  }
}

TEST_CASE("security-constrained model") {
  const GridCase c = load_case(data("case9.case"));
  const std::vector<Contingency> two(c.contingencies.begin(), c.contingencies.begin() + 2);
  const GridModel m = build_scopf(c, two);
  REQUIRE(m.problem.structure);
  CHECK(m.problem.structure->num_blocks == 3);
  CHECK(m.problem.structure->coupling_variables() == 4);
  CHECK(m.problem.structure->check(m.problem.n_x, m.problem.n_e, m.problem.n_i).empty());
  CHECK(m.instances.size() == 3);
  // PV voltages and outputs are shared across scenarios
  CHECK(m.instances[1].v[1] == m.instances[0].v[1]);
  CHECK(m.instances[2].p[2] == m.instances[0].p[2]);
  CHECK(m.instances[1].q[1] != m.instances[0].q[1]);

  const GridModel none = build_scopf(c, {});
  const GridModel opf = build_opf(c);
  CHECK(none.problem.n_x == opf.problem.n_x);
  CHECK(none.problem.n_e == opf.problem.n_e);
  CHECK(none.problem.n_i == opf.problem.n_i);
  const Eigen::VectorXd x = opf.problem.x_start;
  CHECK(eval_functions(none.problem, x).f == eval_functions(opf.problem, x).f);
}

TEST_CASE("multiperiod model") {
  SUBCASE("energy bookkeeping") {
    const GridCase c = parse_case(kStorageCase);
    const GridModel m = build_mpopf(c, 3);
    Eigen::VectorXd x = m.problem.x_start;
    for (const auto& idx : m.instances) {
      x[idx.p_dis[0]] = 0.0;
      x[idx.p_ch[0]] = 0.0;
    }
    x[m.instances[0].p_dis[0]] = 0.01;  // 1 MW for one hour
    const GridSolution s = extract_solution(m, c, x, 0.0);
    CHECK(s.energy(0, 0) == doctest::Approx(5.0 - 1.0 / 0.9));
    CHECK(s.energy(0, 2) == doctest::Approx(3.888888889));
  }
  SUBCASE("storage rows couple earlier periods only") {
    const GridCase c = parse_case(kStorageCase);
    const GridModel m = build_mpopf(c, 3);
    REQUIRE(m.problem.structure);
    const BlockMap& map = *m.problem.structure;
    CHECK(map.num_blocks == 3);
    CHECK(m.c0.rows() == 1);
    CHECK(m.c0 == m.c1);
    const auto& pat = m.problem.evaluator->jacobian_ineq_pattern();
    for (int k = 0; k < 3; ++k) {
      const int row = m.energy_row + k;
      CHECK(map.inequality[row] == kCoupling);
      std::vector<int> seen(3, 0);
      for (std::size_t e = 0; e < pat.size(); ++e) {
        if (pat.rows[e] != row) continue;
        const int block = map.variable[pat.cols[e]];
        REQUIRE(block >= 0);
        seen[block] = 1;
      }
      for (int n = 0; n < 3; ++n) CHECK(seen[n] == (n <= k ? 1 : 0));
    }
  }
  SUBCASE("no storage means no coupling") {
    const GridCase c = load_case(data("case9.case"));
    const GridModel m = build_mpopf(c, 3);
    CHECK(m.energy_row == -1);
    CHECK(m.c0.rows() == 0);
    CHECK(m.problem.structure->coupling_variables() == 0);
    for (int r : m.problem.structure->inequality) CHECK(r != kCoupling);
  }
  SUBCASE("flat demand without storage repeats the single-period dispatch") {
    const GridCase c = load_case(data("case9.case"));
    IpmOptions o;
    o.tol = 1e-8;
    const auto single = solve(build_opf(c).problem, o);
    const GridModel m = build_mpopf(c, 3);
    const auto multi = solve(m.problem, o);
    REQUIRE(single.status == SolveStatus::optimal);
    REQUIRE(multi.status == SolveStatus::optimal);
    CHECK(multi.objective == doctest::Approx(3 * single.objective).epsilon(1e-7));
    const GridSolution s = extract_solution(m, c, multi.iterate.x, multi.objective);
    for (int n = 1; n < 3; ++n)
      CHECK((s.instances[n].p - s.instances[0].p).lpNorm<Eigen::Infinity>() <= 1e-4);
  }
}
