#include "arrowip/iterate.hpp"

#include <cmath>

namespace arrowip {

Bounds::Bounds(const Eigen::VectorXd& lo, const Eigen::VectorXd& up)
    : lower(lo), upper(up), has_lower(lo.size()), has_upper(up.size()) {
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    has_lower[i] = std::isfinite(lo[i]);
    has_upper[i] = std::isfinite(up[i]);
  }
}

int Bounds::finite_sides() const {
  int n = 0;
  for (std::size_t i = 0; i < has_lower.size(); ++i) n += has_lower[i] + has_upper[i];
  return n;
}

Eigen::VectorXd Bounds::lower_distance(const Eigen::VectorXd& v) const {
  Eigen::VectorXd d(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    d[i] = has_lower[i] ? v[i] - lower[i] : std::numeric_limits<double>::infinity();
  }
  return d;
}

Eigen::VectorXd Bounds::upper_distance(const Eigen::VectorXd& v) const {
  Eigen::VectorXd d(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    d[i] = has_upper[i] ? upper[i] - v[i] : std::numeric_limits<double>::infinity();
  }
  return d;
}

bool Bounds::strictly_inside(const Eigen::VectorXd& v) const {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (has_lower[i] && !(v[i] > lower[i])) return false;
    if (has_upper[i] && !(v[i] < upper[i])) return false;
  }
  return true;
}

PrimalDual PrimalDual::zeros(int n_x, int n_e, int n_i) {
  PrimalDual p;
  p.x = Eigen::VectorXd::Zero(n_x);
  p.s = Eigen::VectorXd::Zero(n_i);
  p.lam_eq = Eigen::VectorXd::Zero(n_e);
  p.lam_ineq = Eigen::VectorXd::Zero(n_i);
  p.z_lower = Eigen::VectorXd::Zero(n_x);
  p.z_upper = Eigen::VectorXd::Zero(n_x);
  p.y_lower = Eigen::VectorXd::Zero(n_i);
  p.y_upper = Eigen::VectorXd::Zero(n_i);
  return p;
}

namespace {
double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
}  // namespace

double PrimalDual::norm_inf() const {
  return std::max({inf_norm(x), inf_norm(s), inf_norm(lam_eq), inf_norm(lam_ineq),
                   inf_norm(z_lower), inf_norm(z_upper), inf_norm(y_lower), inf_norm(y_upper)});
}

PrimalDual& PrimalDual::operator+=(const PrimalDual& o) {
  x += o.x;
  s += o.s;
  lam_eq += o.lam_eq;
  lam_ineq += o.lam_ineq;
  z_lower += o.z_lower;
  z_upper += o.z_upper;
  y_lower += o.y_lower;
  y_upper += o.y_upper;
  return *this;
}

PrimalDual& PrimalDual::operator*=(double a) {
  x *= a;
  s *= a;
  lam_eq *= a;
  lam_ineq *= a;
  z_lower *= a;
  z_upper *= a;
  y_lower *= a;
  y_upper *= a;
  return *this;
}

Residuals Residuals::zeros(int n_x, int n_e, int n_i) {
  Residuals r;
  r.a = Eigen::VectorXd::Zero(n_x);
  r.b = Eigen::VectorXd::Zero(n_i);
  r.c = Eigen::VectorXd::Zero(n_e);
  r.d = Eigen::VectorXd::Zero(n_i);
  r.e_lower = Eigen::VectorXd::Zero(n_x);
  r.e_upper = Eigen::VectorXd::Zero(n_x);
  r.f_lower = Eigen::VectorXd::Zero(n_i);
  r.f_upper = Eigen::VectorXd::Zero(n_i);
  return r;
}

namespace {
Eigen::VectorXd compress(const Eigen::VectorXd& lo, const Eigen::VectorXd& up, const Bounds& b) {
  std::vector<double> out;
  for (int i = 0; i < b.size(); ++i) {
    if (b.has_lower[i]) out.push_back(lo[i]);
  }
  for (int i = 0; i < b.size(); ++i) {
    if (b.has_upper[i]) out.push_back(up[i]);
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}
}  // namespace

Eigen::VectorXd Residuals::l_e(const Bounds& xb) const { return compress(e_lower, e_upper, xb); }
Eigen::VectorXd Residuals::l_f(const Bounds& sb) const { return compress(f_lower, f_upper, sb); }

double Residuals::norm_inf() const {
  return std::max({inf_norm(a), inf_norm(b), inf_norm(c), inf_norm(d), inf_norm(e_lower),
                   inf_norm(e_upper), inf_norm(f_lower), inf_norm(f_upper)});
}

Residuals Residuals::operator-() const {
  Residuals r;
  r.a = -a;
  r.b = -b;
  r.c = -c;
  r.d = -d;
  r.e_lower = -e_lower;
  r.e_upper = -e_upper;
  r.f_lower = -f_lower;
  r.f_upper = -f_upper;
  return r;
}

Residuals& Residuals::operator-=(const Residuals& o) {
  a -= o.a;
  b -= o.b;
  c -= o.c;
  d -= o.d;
  e_lower -= o.e_lower;
  e_upper -= o.e_upper;
  f_lower -= o.f_lower;
  f_upper -= o.f_upper;
  return *this;
}

}  // namespace arrowip
