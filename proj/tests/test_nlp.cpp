#include <doctest.h>

#include <cmath>
#include <random>

#include "arrowip/nlp.hpp"
#include "support.hpp"

using namespace arrowip;

namespace {

NlpProblem two_var_one_eq() {
  Eigen::MatrixXd a(1, 2);
  a << 1, 1;
  return testing::make_qp(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2), a,
                          Eigen::VectorXd::Ones(1), Eigen::MatrixXd(0, 2),
                          Eigen::VectorXd::Zero(2), Eigen::VectorXd::Ones(2) * 5,
                          Eigen::VectorXd(0), Eigen::VectorXd(0));
}

/// Returns NaN from the objective.
class NanEvaluator : public testing::QpEvaluator {
 public:
  using QpEvaluator::QpEvaluator;
  bool objective(const Eigen::VectorXd&, double& f) const override {
    f = std::nan("");
    return true;
  }
};

}  // namespace

TEST_CASE("validation") {
  CHECK(validate(two_var_one_eq()).ok());

  NlpProblem inverted = two_var_one_eq();
  inverted.x_lower[0] = 0;
  inverted.x_upper[0] = -1;
  CHECK(validate(inverted).summary() == "inverted bound at index 0");

  NlpProblem fixed = two_var_one_eq();
  fixed.x_lower[0] = 1;
  fixed.x_upper[0] = 1;
  CHECK(validate(fixed).summary() == "fixed variable at index 0");

  NlpProblem mismatch = two_var_one_eq();
  mismatch.x_start = Eigen::VectorXd::Zero(3);
  CHECK_FALSE(validate(mismatch).ok());
}

TEST_CASE("evaluation of a quadratic") {
  NlpProblem p = testing::make_qp(Eigen::MatrixXd::Constant(1, 1, 2.0), Eigen::VectorXd::Zero(1),
                                  Eigen::MatrixXd(0, 1), Eigen::VectorXd(0),
                                  Eigen::MatrixXd(0, 1), Eigen::VectorXd::Constant(1, -kInf),
                                  Eigen::VectorXd::Constant(1, kInf), Eigen::VectorXd(0),
                                  Eigen::VectorXd(0));
  const Evaluation ev =
      eval_all(p, Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd(0), Eigen::VectorXd(0));
  CHECK(ev.ok());
  CHECK(ev.f == 9.0);
  CHECK(ev.grad[0] == 6.0);
}

TEST_CASE("linear constraint Jacobian") {
  const NlpProblem p = two_var_one_eq();
  std::mt19937 rng(1);
  const Eigen::VectorXd x = testing::random_vector(rng, 2);
  const Evaluation ev = eval_first_order(p, x);
  const Eigen::MatrixXd j =
      jacobian_matrix(p.evaluator->jacobian_eq_pattern(), ev.j_eq, 1, 2).to_dense();
  CHECK(j(0, 0) == 1.0);
  CHECK(j(0, 1) == 1.0);
}

TEST_CASE("Hessian agrees with finite differences and is symmetric") {
  std::mt19937 rng(2);
  Eigen::MatrixXd q = testing::random_symmetric(rng, 5);
  NlpProblem p = testing::make_qp(q, testing::random_vector(rng, 5), testing::random_matrix(rng, 2, 5),
                                  Eigen::VectorXd::Zero(2), testing::random_matrix(rng, 1, 5),
                                  Eigen::VectorXd::Constant(5, -kInf),
                                  Eigen::VectorXd::Constant(5, kInf),
                                  Eigen::VectorXd::Constant(1, -kInf), Eigen::VectorXd::Zero(1));
  const Eigen::VectorXd x = testing::random_vector(rng, 5);
  const Evaluation ev = eval_all(p, x, testing::random_vector(rng, 2), testing::random_vector(rng, 1));
  const Eigen::MatrixXd h = hessian_matrix(p.evaluator->hessian_pattern(), ev.hess, 5).to_dense();
  CHECK(h == h.transpose());
  const auto check = testing::check_derivatives(p, x, Eigen::VectorXd::Zero(2),
                                                Eigen::VectorXd::Zero(1));
  CHECK(check.hessian <= 1e-6 * (1 + h.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("non-finite values map to a status") {
  auto e = std::make_shared<NanEvaluator>(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1),
                                          Eigen::MatrixXd(0, 1), Eigen::VectorXd(0),
                                          Eigen::MatrixXd(0, 1));
  NlpProblem p = testing::make_qp(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1),
                                  Eigen::MatrixXd(0, 1), Eigen::VectorXd(0), Eigen::MatrixXd(0, 1),
                                  Eigen::VectorXd::Zero(1), Eigen::VectorXd::Ones(1),
                                  Eigen::VectorXd(0), Eigen::VectorXd(0));
  p.evaluator = e;
  CHECK(eval_functions(p, Eigen::VectorXd::Constant(1, 0.5)).status == EvalStatus::non_finite);
}
