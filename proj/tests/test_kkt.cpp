#include <doctest.h>

#include <random>

#include "arrowip/kkt.hpp"
#include "support.hpp"

using namespace arrowip;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

/// One variable in [0, inf), one inequality slack in [0, inf).
testing::KktInstance scalar_instance(double x, double z, double s, double y) {
  testing::KktInstance k;
  k.h = Eigen::MatrixXd::Constant(1, 1, 1.0);
  k.je = Eigen::MatrixXd(0, 1);
  k.ji = Eigen::MatrixXd::Constant(1, 1, 1.0);
  k.xb = Bounds(vec({0}), vec({kInf}));
  k.sb = Bounds(vec({0}), vec({kInf}));
  k.it.x = vec({x});
  k.it.s = vec({s});
  k.it.lam_eq = Eigen::VectorXd(0);
  k.it.lam_ineq = vec({0});
  k.it.z_lower = vec({z});
  k.it.z_upper = vec({0});
  k.it.y_lower = vec({y});
  k.it.y_upper = vec({0});
  k.rhs = Residuals::zeros(1, 0, 1);
  return k;
}

}  // namespace

TEST_CASE("symmetric assembly") {
  SUBCASE("no bounds keeps the Hessian") {
    std::mt19937 rng(1);
    const Eigen::MatrixXd h = testing::random_symmetric(rng, 3);
    testing::KktInstance k;
    k.h = h;
    k.je = Eigen::MatrixXd(0, 3);
    k.ji = Eigen::MatrixXd(0, 3);
    k.xb = Bounds(Eigen::VectorXd::Constant(3, -kInf), Eigen::VectorXd::Constant(3, kInf));
    k.sb = Bounds(Eigen::VectorXd(0), Eigen::VectorXd(0));
    k.it.x = Eigen::VectorXd::Zero(3);
    k.it.s = k.it.lam_eq = k.it.lam_ineq = k.it.y_lower = k.it.y_upper = Eigen::VectorXd(0);
    k.it.z_lower = k.it.z_upper = Eigen::VectorXd::Zero(3);
    const KktSystem kkt = k.assemble();
    CHECK(kkt.matrix.to_dense() == SparseSym::from_dense(h).to_dense());
  }
  SUBCASE("barrier diagonal") {
    const KktSystem kkt = scalar_instance(0.5, 2.0, 1.0, 1.0).assemble();
    CHECK(kkt.sigma_x[0] == doctest::Approx(4.0));
    CHECK(kkt.matrix.diagonal(0) == doctest::Approx(5.0));
  }
  SUBCASE("regularization shifts") {
    std::mt19937 rng(2);
    const testing::KktInstance k = testing::random_kkt_instance(rng, 4, 1, 2);
    const KktSystem a = k.assemble(0.0, 0.0);
    const KktSystem b = k.assemble(0.0, 1e-8);
    const Eigen::MatrixXd diff = b.matrix.to_dense() - a.matrix.to_dense();
    for (int i = 0; i < a.dim; ++i) {
      CHECK(diff(i, i) == doctest::Approx(i >= a.offset_eq ? -1e-8 : 0.0));
    }
  }
}

TEST_CASE("slack elimination") {
  std::mt19937 rng(3);
  SUBCASE("all slacks fold") {
    testing::KktInstance k = testing::random_kkt_instance(rng, 5, 1, 3);
    const KktSystem full = k.assemble();
    const KktSystem red = reduce_slacks(full);
    CHECK(full.dim - red.dim == 3);
    CHECK(red.eliminated_slacks() == 3);
  }
  SUBCASE("tiny barrier diagonal stays explicit") {
    testing::KktInstance k = testing::random_kkt_instance(rng, 4, 0, 3);
    k.it.y_lower[0] = 1e-30;
    k.it.y_upper[0] = 0.0;
    const KktSystem red = reduce_slacks(k.assemble());
    CHECK(red.eliminated_slacks() == 2);
    CHECK(red.slack_index[0] >= 0);
    CHECK(red.slack_index[1] < 0);
  }
  SUBCASE("reduced solve equals the full symmetric solve") {
    testing::KktInstance k = testing::random_kkt_instance(rng, 5, 0, 2);
    const KktSystem full = k.assemble();
    const KktSystem red = reduce_slacks(full);
    const Direction df = testing::dense_reduced_direction(full, k.rhs);
    const Direction dr = testing::dense_reduced_direction(red, k.rhs);
    const double scale = std::max(1.0, df.x.lpNorm<Eigen::Infinity>());
    CHECK((df.x - dr.x).lpNorm<Eigen::Infinity>() <= 1e-10 * scale);
    CHECK((df.lam_ineq - dr.lam_ineq).lpNorm<Eigen::Infinity>() <= 1e-10 * scale);
    CHECK((df.s - dr.s).lpNorm<Eigen::Infinity>() <= 1e-10 * scale);
  }
  SUBCASE("kept mask") {
    testing::KktInstance k = testing::random_kkt_instance(rng, 4, 1, 3);
    const std::vector<char> keep = {0, 1, 0};
    const KktSystem red = reduce_slacks(k.assemble(), 1e-8, keep);
    CHECK(red.eliminated_slacks() == 2);
    CHECK(red.slack_index[1] >= 0);
    CHECK(red.target_inertia() == Inertia{4 + 1, 1 + 3, 0});
  }
}

TEST_CASE("direction recovery") {
  SUBCASE("zero input") {
    std::mt19937 rng(4);
    testing::KktInstance k = testing::random_kkt_instance(rng, 4, 1, 2);
    const KktSystem red = reduce_slacks(k.assemble());
    const Direction d =
        recover_directions(red, Eigen::VectorXd::Zero(red.dim), Residuals::zeros(4, 1, 2));
    CHECK(d.norm_inf() == 0.0);
  }
  SUBCASE("scalar slack") {
    testing::KktInstance k = scalar_instance(1.0, 1.0, 1.0, 2.0);
    const KktSystem red = reduce_slacks(k.assemble());
    Residuals rhs = Residuals::zeros(1, 0, 1);
    rhs.b = vec({-4.0});
    const Direction d = recover_directions(red, Eigen::VectorXd::Zero(red.dim), rhs);
    CHECK(d.s[0] == doctest::Approx(-2.0));
  }
  SUBCASE("unsymmetric residual after recovery") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 5; ++trial) {
      testing::KktInstance k = testing::random_kkt_instance(rng, 8, 2, 4);
      const KktSystem red = reduce_slacks(k.assemble(1e-3, 1e-6));
      const Direction d = testing::dense_reduced_direction(red, k.rhs);
      CHECK(testing::unsymmetric_residual(k, d, 1e-3, 1e-6) <= 1e-10);
      Residuals back = apply_unsymmetric(red, d);
      back -= k.rhs;
      CHECK(back.norm_inf() <= 1e-10 * k.rhs.norm_inf());
    }
  }
}

TEST_CASE("iterative refinement") {
  std::mt19937 rng(6);
  testing::KktInstance k = testing::random_kkt_instance(rng, 6, 1, 3);
  const KktSystem red = reduce_slacks(k.assemble());
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(red.matrix.to_dense());
  const LinearSolve exact = [&](const Eigen::VectorXd& b) { return Eigen::VectorXd(lu.solve(b)); };
  const Direction d = solve_direction(red, exact, k.rhs);

  SUBCASE("exact input needs no correction") {
    const auto r = iterative_refinement(red, exact, d, k.rhs, 3, 1e-9);
    CHECK(r.rounds == 0);
    CHECK((r.direction.x - d.x).isZero(0.0));
  }
  SUBCASE("perturbed input") {
    Direction p = d;
    p.x.array() += 1e-3;
    Residuals res0 = k.rhs;
    res0 -= apply_unsymmetric(red, p);
    const auto r = iterative_refinement(red, exact, p, k.rhs, 1, 0.0);
    CHECK(r.rounds == 1);
    CHECK(r.residual <= 0.1 * res0.norm_inf());
  }
  SUBCASE("singular operator stagnates") {
    testing::KktInstance s;
    s.h = Eigen::MatrixXd::Zero(2, 2);
    s.je = Eigen::MatrixXd(0, 2);
    s.ji = Eigen::MatrixXd(0, 2);
    s.xb = Bounds(Eigen::VectorXd::Constant(2, -kInf), Eigen::VectorXd::Constant(2, kInf));
    s.sb = Bounds(Eigen::VectorXd(0), Eigen::VectorXd(0));
    s.it.x = Eigen::VectorXd::Zero(2);
    s.it.s = s.it.lam_eq = s.it.lam_ineq = s.it.y_lower = s.it.y_upper = Eigen::VectorXd(0);
    s.it.z_lower = s.it.z_upper = Eigen::VectorXd::Zero(2);
    const KktSystem sing = s.assemble();
    Residuals rhs = Residuals::zeros(2, 0, 0);
    rhs.a = vec({1, 1});
    const LinearSolve zero = [](const Eigen::VectorXd& b) {
      return Eigen::VectorXd(Eigen::VectorXd::Zero(b.size()));
    };
    const auto r = iterative_refinement(sing, zero, Direction::zeros(2, 0, 0), rhs, 3, 1e-12);
    CHECK(r.stagnated);
  }
}
