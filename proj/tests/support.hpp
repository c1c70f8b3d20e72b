#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "arrowip/ipm.hpp"
#include "arrowip/linalg.hpp"
#include "arrowip/mpopf_schur.hpp"
#include "arrowip/nlp.hpp"
#include "arrowip/schur.hpp"

namespace testing {

using arrowip::kInf;

/// f = 0.5 x'Qx + q'x, c_E = A x - b, c_I = G x (dense patterns).
class QpEvaluator : public arrowip::Evaluator {
 public:
  QpEvaluator(Eigen::MatrixXd q_mat, Eigen::VectorXd q, Eigen::MatrixXd a, Eigen::VectorXd b,
              Eigen::MatrixXd g)
      : qm_(std::move(q_mat)), q_(std::move(q)), a_(std::move(a)), b_(std::move(b)),
        g_(std::move(g)) {
    const int n = static_cast<int>(q_.size());
    for (int r = 0; r < a_.rows(); ++r)
      for (int c = 0; c < n; ++c) je_.add(r, c);
    for (int r = 0; r < g_.rows(); ++r)
      for (int c = 0; c < n; ++c) ji_.add(r, c);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c <= r; ++c) h_.add(r, c);
  }

  const arrowip::SparsityPattern& jacobian_eq_pattern() const override { return je_; }
  const arrowip::SparsityPattern& jacobian_ineq_pattern() const override { return ji_; }
  const arrowip::SparsityPattern& hessian_pattern() const override { return h_; }

  bool objective(const Eigen::VectorXd& x, double& f) const override {
    f = 0.5 * x.dot(qm_ * x) + q_.dot(x);
    return true;
  }
  bool gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override {
    g = qm_ * x + q_;
    return true;
  }
  bool constraints(const Eigen::VectorXd& x, Eigen::VectorXd& ce,
                   Eigen::VectorXd& ci) const override {
    ce = a_ * x - b_;
    ci = g_ * x;
    return true;
  }
  bool jacobian(const Eigen::VectorXd&, Eigen::VectorXd& je,
                Eigen::VectorXd& ji) const override {
    je.resize(static_cast<Eigen::Index>(je_.size()));
    for (std::size_t k = 0; k < je_.size(); ++k) je[k] = a_(je_.rows[k], je_.cols[k]);
    ji.resize(static_cast<Eigen::Index>(ji_.size()));
    for (std::size_t k = 0; k < ji_.size(); ++k) ji[k] = g_(ji_.rows[k], ji_.cols[k]);
    return true;
  }
  bool hessian(const Eigen::VectorXd&, double obj_factor, const Eigen::VectorXd&,
               const Eigen::VectorXd&, Eigen::VectorXd& h) const override {
    h.resize(static_cast<Eigen::Index>(h_.size()));
    for (std::size_t k = 0; k < h_.size(); ++k) h[k] = obj_factor * qm_(h_.rows[k], h_.cols[k]);
    return true;
  }

 private:
  Eigen::MatrixXd qm_;
  Eigen::VectorXd q_;
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::MatrixXd g_;
  arrowip::SparsityPattern je_, ji_, h_;
};

inline arrowip::NlpProblem make_qp(Eigen::MatrixXd q_mat, Eigen::VectorXd q, Eigen::MatrixXd a,
                                   Eigen::VectorXd b, Eigen::MatrixXd g, Eigen::VectorXd x_lo,
                                   Eigen::VectorXd x_up, Eigen::VectorXd c_lo,
                                   Eigen::VectorXd c_up) {
  arrowip::NlpProblem p;
  p.n_x = static_cast<int>(q.size());
  p.n_e = static_cast<int>(a.rows());
  p.n_i = static_cast<int>(g.rows());
  p.x_lower = std::move(x_lo);
  p.x_upper = std::move(x_up);
  p.c_lower = std::move(c_lo);
  p.c_upper = std::move(c_up);
  p.evaluator = std::make_shared<QpEvaluator>(std::move(q_mat), std::move(q), std::move(a),
                                              std::move(b), std::move(g));
  return p;
}

/**
 * Strictly convex QP with a known solution:
 *   min 0.5 |x - t|^2  s.t.  x1 + x2 + x3 = 1,  x1 - x2 <= 0.2,  x >= 0,
 * with t = (0.7, 0.1, 0.4). The inequality is active with multiplier 0.2 and the
 * equality multiplier is 1/15, so x = (13/30, 7/30, 1/3).
 */
inline arrowip::NlpProblem convex_qp() {
  const Eigen::Vector3d t(0.7, 0.1, 0.4);
  Eigen::MatrixXd a(1, 3);
  a << 1, 1, 1;
  Eigen::MatrixXd g(1, 3);
  g << 1, -1, 0;
  return make_qp(Eigen::MatrixXd::Identity(3, 3), -t, a, Eigen::VectorXd::Ones(1), g,
                 Eigen::VectorXd::Zero(3), Eigen::VectorXd::Constant(3, kInf),
                 Eigen::VectorXd::Constant(1, -kInf), Eigen::VectorXd::Constant(1, 0.2));
}

inline Eigen::Vector3d convex_qp_solution() { return {13.0 / 30.0, 7.0 / 30.0, 1.0 / 3.0}; }

// ---------------------------------------------------------------------------
// Random data

inline Eigen::MatrixXd random_matrix(std::mt19937& rng, int rows, int cols, double density = 1.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0), keep(0.0, 1.0);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      if (keep(rng) < density) m(i, j) = u(rng);
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937& rng, int n, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  return Eigen::VectorXd::NullaryExpr(n, [&] { return u(rng); });
}

inline Eigen::MatrixXd random_symmetric(std::mt19937& rng, int n, double density = 1.0) {
  Eigen::MatrixXd m = random_matrix(rng, n, n, density);
  return 0.5 * (m + m.transpose());
}

/// Symmetric matrix with eigenvalues of magnitude in [0.5, 2] and the given
/// number of negative and zero ones.
inline Eigen::MatrixXd random_with_inertia(std::mt19937& rng, int pos, int neg, int zero) {
  const int n = pos + neg + zero;
  std::uniform_real_distribution<double> mag(0.5, 2.0);
  Eigen::VectorXd ev(n);
  for (int i = 0; i < n; ++i) ev[i] = i < pos ? mag(rng) : (i < pos + neg ? -mag(rng) : 0.0);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
  const Eigen::MatrixXd q = qr.householderQ();
  Eigen::MatrixXd m = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (m + m.transpose());
}

// ---------------------------------------------------------------------------
// Oracles

/// Eigenvalue sign counts of a dense symmetric matrix.
inline arrowip::Inertia eigen_inertia(const Eigen::MatrixXd& a, double zero_tol = 1e-10) {
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
  arrowip::Inertia in;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double v = es.eigenvalues()[i];
    if (v > zero_tol) {
      ++in.positive;
    } else if (v < -zero_tol) {
      ++in.negative;
    } else {
      ++in.zero;
    }
  }
  return in;
}

inline double relative_residual(const Eigen::MatrixXd& a, const Eigen::VectorXd& x,
                                const Eigen::VectorXd& b) {
  return (a * x - b).lpNorm<Eigen::Infinity>() /
         std::max(1e-300, a.lpNorm<Eigen::Infinity>() * x.lpNorm<Eigen::Infinity>() +
                              b.lpNorm<Eigen::Infinity>());
}

/**
 * Newton system of the primal-dual equations written out densely over
 * [dx, ds, dlam_E, dlam_I, dz_L, dz_U, dy_L, dy_U] with rows a..f. Rows of
 * bound duals at infinite bounds are identity rows (the dual stays zero).
 */
struct UnsymmetricSystem {
  Eigen::MatrixXd k;
  int n_x = 0, n_e = 0, n_i = 0;

  Eigen::VectorXd pack_rhs(const arrowip::Residuals& r) const {
    Eigen::VectorXd v(k.rows());
    v << r.a, r.b, r.c, r.d, r.e_lower, r.e_upper, r.f_lower, r.f_upper;
    return v;
  }
  Eigen::VectorXd pack(const arrowip::Direction& d) const {
    Eigen::VectorXd v(k.rows());
    v << d.x, d.s, d.lam_eq, d.lam_ineq, d.z_lower, d.z_upper, d.y_lower, d.y_upper;
    return v;
  }
};

inline UnsymmetricSystem unsymmetric_system(const Eigen::MatrixXd& h, const Eigen::MatrixXd& je,
                                            const Eigen::MatrixXd& ji,
                                            const arrowip::Iterate& it, const arrowip::Bounds& xb,
                                            const arrowip::Bounds& sb, double dw, double dc) {
  UnsymmetricSystem u;
  const int nx = static_cast<int>(it.x.size()), ne = static_cast<int>(it.lam_eq.size()),
            ni = static_cast<int>(it.s.size());
  u.n_x = nx;
  u.n_e = ne;
  u.n_i = ni;
  const int ox = 0, os = nx, oe = nx + ni, oi = oe + ne, ozl = oi + ni, ozu = ozl + nx,
            oyl = ozu + nx, oyu = oyl + ni, dim = oyu + ni;
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(dim, dim);
  // a: H dx + Je' dlE + Ji' dlI - dzL + dzU
  k.block(ox, ox, nx, nx) = h + dw * Eigen::MatrixXd::Identity(nx, nx);
  k.block(ox, oe, nx, ne) = je.transpose();
  k.block(ox, oi, nx, ni) = ji.transpose();
  k.block(ox, ozl, nx, nx) = -Eigen::MatrixXd::Identity(nx, nx);
  k.block(ox, ozu, nx, nx) = Eigen::MatrixXd::Identity(nx, nx);
  // b: -dlI - dyL + dyU
  k.block(os, os, ni, ni) = dw * Eigen::MatrixXd::Identity(ni, ni);
  k.block(os, oi, ni, ni) = -Eigen::MatrixXd::Identity(ni, ni);
  k.block(os, oyl, ni, ni) = -Eigen::MatrixXd::Identity(ni, ni);
  k.block(os, oyu, ni, ni) = Eigen::MatrixXd::Identity(ni, ni);
  // c, d
  k.block(oe, ox, ne, nx) = je;
  k.block(oe, oe, ne, ne) = -dc * Eigen::MatrixXd::Identity(ne, ne);
  k.block(oi, ox, ni, nx) = ji;
  k.block(oi, os, ni, ni) = -Eigen::MatrixXd::Identity(ni, ni);
  k.block(oi, oi, ni, ni) = -dc * Eigen::MatrixXd::Identity(ni, ni);
  // e, f: Z dx + (x - l) dz (lower), -Z dx + (u - x) dz (upper)
  auto sides = [&](int ovar, const Eigen::VectorXd& v, const Eigen::VectorXd& zl,
                   const Eigen::VectorXd& zu, const arrowip::Bounds& b, int ozlow, int ozup) {
    for (int i = 0; i < v.size(); ++i) {
      if (b.has_lower[i]) {
        k(ozlow + i, ovar + i) = zl[i];
        k(ozlow + i, ozlow + i) = v[i] - b.lower[i];
      } else {
        k(ozlow + i, ozlow + i) = 1.0;
      }
      if (b.has_upper[i]) {
        k(ozup + i, ovar + i) = -zu[i];
        k(ozup + i, ozup + i) = b.upper[i] - v[i];
      } else {
        k(ozup + i, ozup + i) = 1.0;
      }
    }
  };
  sides(ox, it.x, it.z_lower, it.z_upper, xb, ozl, ozu);
  sides(os, it.s, it.y_lower, it.y_upper, sb, oyl, oyu);
  u.k = std::move(k);
  return u;
}

/// Random strictly interior iterate for the given bounds.
inline arrowip::Iterate random_iterate(std::mt19937& rng, const arrowip::Bounds& xb,
                                       const arrowip::Bounds& sb, int n_e) {
  std::uniform_real_distribution<double> u(0.1, 1.0), s(-1.0, 1.0);
  auto inside = [&](const arrowip::Bounds& b) {
    Eigen::VectorXd v(b.size());
    for (int i = 0; i < b.size(); ++i) {
      if (b.has_lower[i] && b.has_upper[i]) {
        v[i] = b.lower[i] + u(rng) * 0.9 * (b.upper[i] - b.lower[i]);
      } else if (b.has_lower[i]) {
        v[i] = b.lower[i] + u(rng);
      } else if (b.has_upper[i]) {
        v[i] = b.upper[i] - u(rng);
      } else {
        v[i] = s(rng);
      }
    }
    return v;
  };
  auto duals = [&](const std::vector<char>& mask) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) v[i] = u(rng);
    return v;
  };
  arrowip::Iterate it;
  it.x = inside(xb);
  it.s = inside(sb);
  it.lam_eq = Eigen::VectorXd::NullaryExpr(n_e, [&] { return s(rng); });
  it.lam_ineq = Eigen::VectorXd::NullaryExpr(sb.size(), [&] { return s(rng); });
  it.z_lower = duals(xb.has_lower);
  it.z_upper = duals(xb.has_upper);
  it.y_lower = duals(sb.has_lower);
  it.y_upper = duals(sb.has_upper);
  return it;
}

/// Random two-sided / one-sided / free bounds.
inline arrowip::Bounds random_bounds(std::mt19937& rng, int n) {
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w(0.5, 2.0);
  Eigen::VectorXd lo(n), up(n);
  for (int i = 0; i < n; ++i) {
    const int k = kind(rng);
    const double a = u(rng);
    lo[i] = (k == 0 || k == 1) ? a : -kInf;
    up[i] = (k == 0 || k == 2) ? a + w(rng) : kInf;
  }
  return arrowip::Bounds(lo, up);
}

/// Random Newton system data: Hessian, Jacobians, interior iterate, bounds
/// and a right-hand side in residual form.
struct KktInstance {
  Eigen::MatrixXd h, je, ji;
  arrowip::Iterate it;
  arrowip::Bounds xb, sb;
  arrowip::Residuals rhs;

  arrowip::SymmetricKkt assemble(double dw = 0.0, double dc = 0.0) const {
    return arrowip::assemble_symmetric(it, xb, sb, arrowip::SparseSym::from_dense(h),
                                       sparse(je), sparse(ji), dw, dc);
  }
  static arrowip::SparseMatrix sparse(const Eigen::MatrixXd& m) {
    std::vector<arrowip::Triplet> t;
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) t.push_back({i, j, m(i, j)});
    return arrowip::SparseMatrix::from_triplets(static_cast<int>(m.rows()),
                                                static_cast<int>(m.cols()), t);
  }
};

inline KktInstance random_kkt_instance(std::mt19937& rng, int nx, int ne, int ni) {
  KktInstance k;
  k.h = random_symmetric(rng, nx, 0.3);
  k.h.diagonal().array() += 2.0;
  k.je = random_matrix(rng, ne, nx, 0.5);
  k.ji = random_matrix(rng, ni, nx, 0.5);
  for (int r = 0; r < ne; ++r) k.je(r, r % nx) += 1.0;
  for (int r = 0; r < ni; ++r) k.ji(r, (r + ne) % nx) += 1.0;
  k.xb = random_bounds(rng, nx);
  k.sb = random_bounds(rng, ni);
  for (int i = 0; i < ni; ++i) {
    if (!k.sb.has_lower[i] && !k.sb.has_upper[i]) {
      k.sb.lower[i] = -1.0;
      k.sb.has_lower[i] = 1;
    }
  }
  k.it = random_iterate(rng, k.xb, k.sb, ne);
  k.rhs = arrowip::Residuals::zeros(nx, ne, ni);
  k.rhs.a = random_vector(rng, nx);
  k.rhs.b = random_vector(rng, ni);
  k.rhs.c = random_vector(rng, ne);
  k.rhs.d = random_vector(rng, ni);
  auto sides = [&](const std::vector<char>& mask) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i]) v[i] = std::uniform_real_distribution<double>(-1, 1)(rng);
    return v;
  };
  k.rhs.e_lower = sides(k.xb.has_lower);
  k.rhs.e_upper = sides(k.xb.has_upper);
  k.rhs.f_lower = sides(k.sb.has_lower);
  k.rhs.f_upper = sides(k.sb.has_upper);
  return k;
}

/// Reduced-path direction from a dense solve of the iteration matrix.
inline arrowip::Direction dense_reduced_direction(const arrowip::KktSystem& kkt,
                                                  const arrowip::Residuals& rhs) {
  const Eigen::MatrixXd m = kkt.matrix.to_dense();
  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
  return arrowip::solve_direction(
      kkt, [&](const Eigen::VectorXd& b) { return Eigen::VectorXd(lu.solve(b)); }, rhs);
}

/// Relative residual of the direction in the dense unsymmetric system.
inline double unsymmetric_residual(const KktInstance& k, const arrowip::Direction& d, double dw,
                                   double dc) {
  const UnsymmetricSystem u = unsymmetric_system(k.h, k.je, k.ji, k.it, k.xb, k.sb, dw, dc);
  const Eigen::VectorXd b = u.pack_rhs(k.rhs), x = u.pack(d);
  return (u.k * x - b).lpNorm<Eigen::Infinity>() /
         std::max(1e-300, b.lpNorm<Eigen::Infinity>());
}

// ---------------------------------------------------------------------------
// Arrowhead fixtures

struct ArrowheadFixture {
  arrowip::SparseSym matrix;
  std::vector<int> labels;
  int num_blocks = 0;
  Eigen::VectorXd rhs;
};

/**
 * Quasi-definite blocks (positive then negative part) with a sparse border
 * and a coupling diagonal large enough to keep S well conditioned. Rows of
 * different blocks are interleaved in the original ordering.
 */
inline ArrowheadFixture random_arrowhead(std::mt19937& rng, int num_blocks, int block_dim,
                                         int coupling_dim, double border_density = 0.3) {
  ArrowheadFixture f;
  f.num_blocks = num_blocks;
  const int dim = num_blocks * block_dim + coupling_dim;
  std::vector<int> perm(dim);
  for (int i = 0; i < dim; ++i) perm[i] = i;
  std::shuffle(perm.begin(), perm.end(), rng);
  f.labels.assign(dim, arrowip::kCoupling);
  std::vector<arrowip::Triplet> t;
  std::uniform_real_distribution<double> u(-1.0, 1.0), keep(0.0, 1.0);
  std::vector<std::vector<int>> rows(num_blocks);
  int next = 0;
  for (int b = 0; b < num_blocks; ++b) {
    for (int i = 0; i < block_dim; ++i) {
      rows[b].push_back(perm[next]);
      f.labels[perm[next]] = b;
      ++next;
    }
  }
  std::vector<int> coupling(perm.begin() + next, perm.end());
  for (int b = 0; b < num_blocks; ++b) {
    const int npos = (block_dim + 1) / 2;
    for (int i = 0; i < block_dim; ++i) {
      const double sign = i < npos ? 1.0 : -1.0;
      t.push_back({rows[b][i], rows[b][i], sign * (4.0 + keep(rng))});
      for (int j = 0; j < i; ++j) {
        const bool same_part = (i < npos) == (j < npos);
        if (keep(rng) < 0.3) t.push_back({rows[b][i], rows[b][j], (same_part ? 0.5 : 1.0) * u(rng)});
      }
    }
    for (int c : coupling) {
      for (int i = 0; i < block_dim; ++i) {
        if (keep(rng) < border_density) t.push_back({c, rows[b][i], u(rng)});
      }
    }
  }
  for (std::size_t i = 0; i < coupling.size(); ++i) {
    const double sign = i % 2 ? -1.0 : 1.0;
    t.push_back({coupling[i], coupling[i], sign * (2.0 * num_blocks + 4.0)});
    for (std::size_t j = 0; j < i; ++j) {
      if (keep(rng) < 0.2) t.push_back({coupling[i], coupling[j], 0.3 * u(rng)});
    }
  }
  f.matrix = arrowip::SparseSym::from_triplets(dim, t);
  f.rhs = Eigen::VectorXd::NullaryExpr(dim, [&] { return u(rng); });
  return f;
}

// ---------------------------------------------------------------------------
// Finite differences

struct DerivativeCheck {
  double gradient = 0.0;  // worst relative deviation
  double jacobian = 0.0;
  double hessian = 0.0;
  double worst() const { return std::max({gradient, jacobian, hessian}); }
};

/// max |a - b| / max(1, |a|_inf), over entries of same-shaped matrices.
inline double relative_deviation(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  const double scale = std::max(1.0, analytic.lpNorm<Eigen::Infinity>());
  return (analytic - fd).lpNorm<Eigen::Infinity>() / scale;
}

/**
 * Central differences of f, c and of the Lagrangian gradient at x, compared
 * with the analytic gradient, Jacobians and Hessian.
 */
inline DerivativeCheck check_derivatives(const arrowip::NlpProblem& p, const Eigen::VectorXd& x,
                                         const Eigen::VectorXd& lam_eq,
                                         const Eigen::VectorXd& lam_ineq, double step = 1e-6) {
  using namespace arrowip;
  const Evaluator& ev = *p.evaluator;
  auto jac = [&](const Eigen::VectorXd& at, Eigen::MatrixXd& je, Eigen::MatrixXd& ji) {
    Eigen::VectorXd ve, vi;
    ev.jacobian(at, ve, vi);
    je = jacobian_matrix(ev.jacobian_eq_pattern(), ve, p.n_e, p.n_x).to_dense();
    ji = jacobian_matrix(ev.jacobian_ineq_pattern(), vi, p.n_i, p.n_x).to_dense();
  };
  auto lagrangian_grad = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd g;
    ev.gradient(at, g);
    Eigen::MatrixXd je, ji;
    jac(at, je, ji);
    return Eigen::VectorXd(g + je.transpose() * lam_eq + ji.transpose() * lam_ineq);
  };

  Eigen::VectorXd g;
  ev.gradient(x, g);
  Eigen::MatrixXd je, ji;
  jac(x, je, ji);
  Eigen::VectorXd hv;
  ev.hessian(x, 1.0, lam_eq, lam_ineq, hv);
  const Eigen::MatrixXd h = hessian_matrix(ev.hessian_pattern(), hv, p.n_x).to_dense();

  Eigen::VectorXd g_fd(p.n_x);
  Eigen::MatrixXd je_fd(p.n_e, p.n_x), ji_fd(p.n_i, p.n_x), h_fd(p.n_x, p.n_x);
  for (int k = 0; k < p.n_x; ++k) {
    const double hk = step * std::max(1.0, std::abs(x[k]));
    Eigen::VectorXd xp = x, xm = x;
    xp[k] += hk;
    xm[k] -= hk;
    double fp, fm;
    ev.objective(xp, fp);
    ev.objective(xm, fm);
    g_fd[k] = (fp - fm) / (2 * hk);
    Eigen::VectorXd cep, cip, cem, cim;
    ev.constraints(xp, cep, cip);
    ev.constraints(xm, cem, cim);
    je_fd.col(k) = (cep - cem) / (2 * hk);
    ji_fd.col(k) = (cip - cim) / (2 * hk);
    h_fd.col(k) = (lagrangian_grad(xp) - lagrangian_grad(xm)) / (2 * hk);
  }
  DerivativeCheck out;
  out.gradient = relative_deviation(g, g_fd);
  out.jacobian = std::max(p.n_e ? relative_deviation(je, je_fd) : 0.0,
                          p.n_i ? relative_deviation(ji, ji_fd) : 0.0);
  out.hessian = relative_deviation(h, h_fd);
  return out;
}

/// Uniform point inside the box (free coordinates in [-0.5, 0.5]).
inline Eigen::VectorXd random_interior(std::mt19937& rng, const arrowip::NlpProblem& p) {
  std::uniform_real_distribution<double> u(0.05, 0.95), s(-0.5, 0.5);
  Eigen::VectorXd x(p.n_x);
  for (int i = 0; i < p.n_x; ++i) {
    const double lo = p.x_lower[i], up = p.x_upper[i];
    if (std::isfinite(lo) && std::isfinite(up)) {
      x[i] = lo + u(rng) * (up - lo);
    } else if (std::isfinite(lo)) {
      x[i] = lo + u(rng);
    } else if (std::isfinite(up)) {
      x[i] = up - u(rng);
    } else {
      x[i] = s(rng);
    }
  }
  return x;
}

// ---------------------------------------------------------------------------
// Multiperiod horizons

/// Dense border of period n: C1 in its own row block, C0 in later ones.
inline Eigen::MatrixXd border(const Eigen::MatrixXd& c0, const Eigen::MatrixXd& c1, int n, int periods) {
  const Eigen::Index ns = c1.rows();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(periods * ns, c1.cols());
  b.middleRows(n * ns, ns) = c1;
  for (int k = n + 1; k < periods; ++k) b.middleRows(k * ns, ns) = c0;
  return b;
}

struct Horizon {
  std::vector<Eigen::MatrixXd> a;
  Eigen::MatrixXd c0, c1;
  std::vector<arrowip::ReplicatedScBlock> blocks;
  std::vector<Eigen::MatrixXd> corner;
};

inline Horizon random_horizon(std::mt19937& rng, int periods, int ns, int width) {
  Horizon h;
  h.c0 = random_matrix(rng, ns, width, 0.5);
  h.c1 = random_matrix(rng, ns, width, 0.5);
  for (int n = 0; n < periods; ++n) {
    const int neg = width / 3;
    h.a.push_back(random_with_inertia(rng, width - neg, neg, 0));
    h.blocks.push_back(arrowip::replicated_contribution(arrowip::SparseSym::from_dense(h.a.back()), h.c0, h.c1));
    h.corner.push_back(-0.5 * Eigen::MatrixXd::Identity(ns, ns) +
                       0.1 * random_symmetric(rng, ns));
  }
  return h;
}

/// corner - sum_n B_n A_n^-1 B_n^T computed densely.
inline Eigen::MatrixXd brute_force(const Horizon& h) {
  const int periods = static_cast<int>(h.a.size());
  const Eigen::Index ns = h.c1.rows();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(periods * ns, periods * ns);
  for (int k = 0; k < periods; ++k) s.block(k * ns, k * ns, ns, ns) = h.corner[k];
  for (int n = 0; n < periods; ++n) {
    const Eigen::MatrixXd b = border(h.c0, h.c1, n, periods);
    s -= b * h.a[n].partialPivLu().solve(b.transpose());
  }
  return s;
}


}  // namespace testing
