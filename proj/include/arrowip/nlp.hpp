#pragma once

// Problem abstraction for the interior-point driver:
//   min f(x)  s.t.  c_E(x) = 0,  c_lower <= c_I(x) <= c_upper,
//                   x_lower <= x <= x_upper.

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "arrowip/block_map.hpp"
#include "arrowip/linalg.hpp"

namespace arrowip {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Coordinate pattern; Hessian patterns hold the lower triangle (row >= col).
struct SparsityPattern {
  std::vector<int> rows;
  std::vector<int> cols;

  std::size_t size() const { return rows.size(); }
  void add(int r, int c) {
    rows.push_back(r);
    cols.push_back(c);
  }
};

/**
 * Function and derivative callbacks. Every method returns false on an
 * evaluation error. Implementations must tolerate concurrent const calls.
 */
class Evaluator {
 public:
  virtual ~Evaluator() = default;

  virtual const SparsityPattern& jacobian_eq_pattern() const = 0;
  virtual const SparsityPattern& jacobian_ineq_pattern() const = 0;
  virtual const SparsityPattern& hessian_pattern() const = 0;

  virtual bool objective(const Eigen::VectorXd& x, double& f) const = 0;
  virtual bool gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const = 0;
  virtual bool constraints(const Eigen::VectorXd& x, Eigen::VectorXd& c_eq,
                           Eigen::VectorXd& c_ineq) const = 0;
  virtual bool jacobian(const Eigen::VectorXd& x, Eigen::VectorXd& j_eq,
                        Eigen::VectorXd& j_ineq) const = 0;
  /// Values of obj_factor * grad^2 f + sum lam_eq grad^2 c_E + sum lam_ineq grad^2 c_I
  /// on hessian_pattern().
  virtual bool hessian(const Eigen::VectorXd& x, double obj_factor,
                       const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_ineq,
                       Eigen::VectorXd& h) const = 0;
};

struct NlpProblem {
  int n_x = 0;
  int n_e = 0;
  int n_i = 0;
  Eigen::VectorXd x_lower, x_upper;
  Eigen::VectorXd c_lower, c_upper;
  Eigen::VectorXd x_start;
  std::shared_ptr<const Evaluator> evaluator;
  std::optional<BlockMap> structure;
};

struct ValidationReport {
  std::vector<std::string> findings;
  bool ok() const { return findings.empty(); }
  std::string summary() const;
};

ValidationReport validate(const NlpProblem& problem);

enum class EvalStatus { ok, non_finite, evaluation_error };

const char* to_string(EvalStatus s);

/// Everything the primal-dual equations reference at one point.
struct Evaluation {
  EvalStatus status = EvalStatus::ok;
  double f = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd c_eq, c_ineq;
  Eigen::VectorXd j_eq, j_ineq;  // values on the Jacobian patterns
  Eigen::VectorXd hess;          // values on the Hessian pattern
  bool ok() const { return status == EvalStatus::ok; }
};

/// Objective and constraint values only.
Evaluation eval_functions(const NlpProblem& problem, const Eigen::VectorXd& x);
/// Adds gradient and Jacobians to eval_functions().
Evaluation eval_first_order(const NlpProblem& problem, const Eigen::VectorXd& x);
/// Hessian of the Lagrangian into `ev.hess` (status updated).
void eval_hessian(const NlpProblem& problem, const Eigen::VectorXd& x, double obj_factor,
                  const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_ineq,
                  Evaluation& ev);
Evaluation eval_all(const NlpProblem& problem, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_ineq,
                    double obj_factor = 1.0);

SparseMatrix jacobian_matrix(const SparsityPattern& pattern, const Eigen::VectorXd& values,
                             int rows, int cols);
/// Symmetric Hessian from lower-triangle values.
SparseSym hessian_matrix(const SparsityPattern& pattern, const Eigen::VectorXd& values,
                         int n);

}  // namespace arrowip
