#pragma once

// Symmetric KKT assembly, slack elimination, direction recovery and
// iterative refinement against the unsymmetric Newton operator.

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "arrowip/iterate.hpp"
#include "arrowip/linalg.hpp"

namespace arrowip {

/**
 * The symmetric iteration matrix over [dx | ds(kept) | dlam_eq | dlam_ineq].
 *
 * With no slack eliminated this is the regularized four-block system
 *   [ H+Sx+dw   0        Je^T  Ji^T ]
 *   [ 0         Ls+dw    0     -I   ]
 *   [ Je        0        -dc   0    ]
 *   [ Ji        -I       0     -dc  ]
 * Eliminated slacks drop their row and fold -1/(Ls+dw) into the matching
 * inequality diagonal.
 */
struct KktSystem {
  int n_x = 0, n_e = 0, n_i = 0;
  SparseSym hessian;
  SparseMatrix jac_eq, jac_ineq;

  // Distances to finite bounds (+inf elsewhere) and the matching duals.
  Eigen::VectorXd dist_x_lower, dist_x_upper, dist_s_lower, dist_s_upper;
  Eigen::VectorXd z_lower, z_upper, y_lower, y_upper;
  Eigen::VectorXd sigma_x;  // Z_L (X - X_min)^-1 + Z_U (X_max - X)^-1
  Eigen::VectorXd sigma_s;  // L_s, same construction over the slacks

  double delta_w = 0.0;
  double delta_c = 0.0;
  Eigen::VectorXd base_diagonal;  // matrix diagonal without regularization

  std::vector<char> eliminated;  // per slack
  std::vector<int> slack_index;  // position in the matrix, -1 when eliminated
  int offset_eq = 0;
  int offset_ineq = 0;
  int dim = 0;
  SparseSym matrix;

  int kept_slacks() const;
  int eliminated_slacks() const { return n_i - kept_slacks(); }
  /// (n_x + kept slacks, n_e + n_i, 0).
  Inertia target_inertia() const;
  /// Rewrites the regularized diagonal in place.
  void set_regularization(double dw, double dc);
};

using SymmetricKkt = KktSystem;
using ReducedKkt = KktSystem;

SymmetricKkt assemble_symmetric(const Iterate& it, const Bounds& xb, const Bounds& sb,
                                const SparseSym& hessian, const SparseMatrix& jac_eq,
                                const SparseMatrix& jac_ineq, double delta_w, double delta_c);

/**
 * Folds every slack with L_s[i] >= relative_eps * max(L_s) into the
 * inequality block. Slacks flagged in `keep` stay explicit.
 */
ReducedKkt reduce_slacks(const SymmetricKkt& kkt, double relative_eps = 1e-8,
                         std::span<const char> keep = {});

/// Right-hand side in matrix layout for the Newton system K d = rhs.
Eigen::VectorXd reduced_rhs(const KktSystem& kkt, const Residuals& rhs);

/// Eliminated slack steps and bound-dual steps from a reduced solution.
Direction recover_directions(const KktSystem& kkt, const Eigen::VectorXd& solution,
                             const Residuals& rhs);

/// Product of the full (regularized) unsymmetric Newton operator with d.
Residuals apply_unsymmetric(const KktSystem& kkt, const Direction& d);

using LinearSolve = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// reduced_rhs -> solve -> recover_directions.
Direction solve_direction(const KktSystem& kkt, const LinearSolve& solve, const Residuals& rhs);

struct RefinementResult {
  Direction direction;
  int rounds = 0;
  bool stagnated = false;
  double residual = 0.0;  // inf-norm of rhs - K d for the returned direction
};

/**
 * Block label of every matrix row: x and slack rows take their variable and
 * slack labels, multiplier rows their constraint labels.
 */
std::vector<int> matrix_labels(const KktSystem& kkt, const std::vector<int>& variable,
                               const std::vector<int>& slack, const std::vector<int>& equality,
                               const std::vector<int>& inequality);

RefinementResult iterative_refinement(const KktSystem& kkt, const LinearSolve& solve,
                                      Direction d, const Residuals& rhs, int max_rounds,
                                      double tolerance);

}  // namespace arrowip
