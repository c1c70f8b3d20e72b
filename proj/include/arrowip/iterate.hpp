#pragma once

// Primal-dual state shared by the KKT assembly and the interior-point driver.

#include <vector>

#include <Eigen/Core>

namespace arrowip {

/// Two-sided bounds with finiteness masks.
struct Bounds {
  Eigen::VectorXd lower, upper;
  std::vector<char> has_lower, has_upper;

  Bounds() = default;
  Bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& up);
  int size() const { return static_cast<int>(lower.size()); }
  int finite_sides() const;
  /// Distance to each finite lower bound, +inf elsewhere.
  Eigen::VectorXd lower_distance(const Eigen::VectorXd& v) const;
  Eigen::VectorXd upper_distance(const Eigen::VectorXd& v) const;
  /// True when v is strictly inside every finite bound.
  bool strictly_inside(const Eigen::VectorXd& v) const;
};

/**
 * Vectors of a primal-dual point or direction. Bound duals are stored at
 * full length with zeros at infinite bounds.
 */
struct PrimalDual {
  Eigen::VectorXd x, s;
  Eigen::VectorXd lam_eq, lam_ineq;
  Eigen::VectorXd z_lower, z_upper;
  Eigen::VectorXd y_lower, y_upper;

  static PrimalDual zeros(int n_x, int n_e, int n_i);
  double norm_inf() const;
  PrimalDual& operator+=(const PrimalDual& o);
  PrimalDual& operator*=(double a);
};

struct Iterate : PrimalDual {
  double mu = 0.0;
};

using Direction = PrimalDual;

/**
 * The six residual blocks of the primal-dual equations. The complementarity
 * blocks are kept per bound side at full length (zero at infinite bounds);
 * l_e()/l_f() return them compressed to the finite sides.
 */
struct Residuals {
  Eigen::VectorXd a, b, c, d;
  Eigen::VectorXd e_lower, e_upper, f_lower, f_upper;

  static Residuals zeros(int n_x, int n_e, int n_i);
  Eigen::VectorXd l_e(const Bounds& xb) const;
  Eigen::VectorXd l_f(const Bounds& sb) const;
  double norm_inf() const;
  Residuals operator-() const;
  Residuals& operator-=(const Residuals& o);
};

}  // namespace arrowip
