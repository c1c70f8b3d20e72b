#include "arrowip/kkt.hpp"

#include <algorithm>
#include <cmath>

namespace arrowip {

namespace {

Eigen::VectorXd ratio(const Eigen::VectorXd& num, const Eigen::VectorXd& den) {
  Eigen::VectorXd r(num.size());
  for (Eigen::Index i = 0; i < num.size(); ++i) {
    r[i] = std::isfinite(den[i]) ? num[i] / den[i] : 0.0;
  }
  return r;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

/// Lays out rows and builds the matrix for the current elimination mask.
void build_matrix(KktSystem& k) {
  k.slack_index.assign(k.n_i, -1);
  int row = k.n_x;
  for (int i = 0; i < k.n_i; ++i) {
    if (!k.eliminated[i]) k.slack_index[i] = row++;
  }
  k.offset_eq = row;
  k.offset_ineq = row + k.n_e;
  k.dim = k.offset_ineq + k.n_i;

  std::vector<Triplet> t;
  t.reserve(k.hessian.nnz() + k.jac_eq.nnz() + k.jac_ineq.nnz() + 3 * k.n_i + k.dim);
  k.base_diagonal = Eigen::VectorXd::Zero(k.dim);

  const auto hrs = k.hessian.row_start();
  const auto hci = k.hessian.col_index();
  const auto hva = k.hessian.values();
  for (int i = 0; i < k.n_x; ++i) {
    for (int p = hrs[i]; p < hrs[i + 1]; ++p) {
      if (hci[p] != i) t.push_back({i, hci[p], hva[p]});
    }
    k.base_diagonal[i] = k.hessian.diagonal(i) + k.sigma_x[i];
  }
  for (int i = 0; i < k.n_i; ++i) {
    const int si = k.slack_index[i];
    if (si >= 0) {
      k.base_diagonal[si] = k.sigma_s[i];
      t.push_back({k.offset_ineq + i, si, -1.0});
    }
  }
  auto add_jacobian = [&](const SparseMatrix& j, int offset) {
    const auto rs = j.row_start();
    const auto ci = j.col_index();
    const auto va = j.values();
    for (int r = 0; r < j.rows(); ++r) {
      for (int p = rs[r]; p < rs[r + 1]; ++p) t.push_back({offset + r, ci[p], va[p]});
    }
  };
  add_jacobian(k.jac_eq, k.offset_eq);
  add_jacobian(k.jac_ineq, k.offset_ineq);
  for (int i = 0; i < k.dim; ++i) t.push_back({i, i, 0.0});
  k.matrix = SparseSym::from_triplets(k.dim, t);
  k.set_regularization(k.delta_w, k.delta_c);
}

}  // namespace

int KktSystem::kept_slacks() const {
  int n = 0;
  for (char e : eliminated) n += !e;
  return n;
}

Inertia KktSystem::target_inertia() const { return {n_x + kept_slacks(), n_e + n_i, 0}; }

void KktSystem::set_regularization(double dw, double dc) {
  delta_w = dw;
  delta_c = dc;
  const auto rs = matrix.row_start();
  auto vals = matrix.values();
  for (int i = 0; i < offset_eq; ++i) vals[rs[i]] = base_diagonal[i] + dw;
  for (int i = 0; i < n_e; ++i) vals[rs[offset_eq + i]] = -dc;
  for (int i = 0; i < n_i; ++i) {
    double d = -dc;
    if (eliminated[i]) d -= 1.0 / (sigma_s[i] + dw);
    vals[rs[offset_ineq + i]] = d;
  }
}

SymmetricKkt assemble_symmetric(const Iterate& it, const Bounds& xb, const Bounds& sb,
                                const SparseSym& hessian, const SparseMatrix& jac_eq,
                                const SparseMatrix& jac_ineq, double delta_w, double delta_c) {
  KktSystem k;
  k.n_x = static_cast<int>(it.x.size());
  k.n_e = static_cast<int>(it.lam_eq.size());
  k.n_i = static_cast<int>(it.s.size());
  k.hessian = hessian;
  k.jac_eq = jac_eq;
  k.jac_ineq = jac_ineq;
  k.dist_x_lower = xb.lower_distance(it.x);
  k.dist_x_upper = xb.upper_distance(it.x);
  k.dist_s_lower = sb.lower_distance(it.s);
  k.dist_s_upper = sb.upper_distance(it.s);
  k.z_lower = it.z_lower;
  k.z_upper = it.z_upper;
  k.y_lower = it.y_lower;
  k.y_upper = it.y_upper;
  k.sigma_x = ratio(it.z_lower, k.dist_x_lower) + ratio(it.z_upper, k.dist_x_upper);
  k.sigma_s = ratio(it.y_lower, k.dist_s_lower) + ratio(it.y_upper, k.dist_s_upper);
  k.delta_w = delta_w;
  k.delta_c = delta_c;
  k.eliminated.assign(k.n_i, 0);
  build_matrix(k);
  return k;
}

ReducedKkt reduce_slacks(const SymmetricKkt& kkt, double relative_eps, std::span<const char> keep) {
  KktSystem k = kkt;
  const double cut = relative_eps * inf_norm(k.sigma_s);
  for (int i = 0; i < k.n_i; ++i) {
    const bool forced = !keep.empty() && keep[i];
    k.eliminated[i] = !forced && k.sigma_s[i] > 0.0 && k.sigma_s[i] >= cut;
  }
  build_matrix(k);
  return k;
}

namespace {

Eigen::VectorXd rho_b(const KktSystem& k, const Residuals& r) {
  return r.b + ratio(r.f_lower, k.dist_s_lower) - ratio(r.f_upper, k.dist_s_upper);
}

}  // namespace

Eigen::VectorXd reduced_rhs(const KktSystem& k, const Residuals& r) {
  Eigen::VectorXd out(k.dim);
  out.head(k.n_x) = r.a + ratio(r.e_lower, k.dist_x_lower) - ratio(r.e_upper, k.dist_x_upper);
  const Eigen::VectorXd rb = rho_b(k, r);
  for (int i = 0; i < k.n_i; ++i) {
    if (k.slack_index[i] >= 0) {
      out[k.slack_index[i]] = rb[i];
      out[k.offset_ineq + i] = r.d[i];
    } else {
      out[k.offset_ineq + i] = r.d[i] + rb[i] / (k.sigma_s[i] + k.delta_w);
    }
  }
  out.segment(k.offset_eq, k.n_e) = r.c;
  return out;
}

Direction recover_directions(const KktSystem& k, const Eigen::VectorXd& sol, const Residuals& r) {
  Direction d;
  d.x = sol.head(k.n_x);
  d.lam_eq = sol.segment(k.offset_eq, k.n_e);
  d.lam_ineq = sol.segment(k.offset_ineq, k.n_i);
  d.s.resize(k.n_i);
  const Eigen::VectorXd rb = rho_b(k, r);
  for (int i = 0; i < k.n_i; ++i) {
    d.s[i] = k.slack_index[i] >= 0 ? sol[k.slack_index[i]]
                                   : (rb[i] + d.lam_ineq[i]) / (k.sigma_s[i] + k.delta_w);
  }
  d.z_lower = ratio(r.e_lower - k.z_lower.cwiseProduct(d.x), k.dist_x_lower);
  d.z_upper = ratio(r.e_upper + k.z_upper.cwiseProduct(d.x), k.dist_x_upper);
  d.y_lower = ratio(r.f_lower - k.y_lower.cwiseProduct(d.s), k.dist_s_lower);
  d.y_upper = ratio(r.f_upper + k.y_upper.cwiseProduct(d.s), k.dist_s_upper);
  return d;
}

Residuals apply_unsymmetric(const KktSystem& k, const Direction& d) {
  Residuals r;
  r.a = k.hessian.multiply(d.x) + k.delta_w * d.x + k.jac_eq.multiply_transpose(d.lam_eq) +
        k.jac_ineq.multiply_transpose(d.lam_ineq) - d.z_lower + d.z_upper;
  r.b = -d.lam_ineq - d.y_lower + d.y_upper + k.delta_w * d.s;
  r.c = k.jac_eq.multiply(d.x) - k.delta_c * d.lam_eq;
  r.d = k.jac_ineq.multiply(d.x) - d.s - k.delta_c * d.lam_ineq;
  auto side = [](const Eigen::VectorXd& dual, const Eigen::VectorXd& dist,
                 const Eigen::VectorXd& dv, const Eigen::VectorXd& ddual, double sign) {
    Eigen::VectorXd out(dv.size());
    for (Eigen::Index i = 0; i < dv.size(); ++i) {
      out[i] = std::isfinite(dist[i]) ? sign * dual[i] * dv[i] + dist[i] * ddual[i] : 0.0;
    }
    return out;
  };
  r.e_lower = side(k.z_lower, k.dist_x_lower, d.x, d.z_lower, 1.0);
  r.e_upper = side(k.z_upper, k.dist_x_upper, d.x, d.z_upper, -1.0);
  r.f_lower = side(k.y_lower, k.dist_s_lower, d.s, d.y_lower, 1.0);
  r.f_upper = side(k.y_upper, k.dist_s_upper, d.s, d.y_upper, -1.0);
  return r;
}

Direction solve_direction(const KktSystem& kkt, const LinearSolve& solve, const Residuals& rhs) {
  return recover_directions(kkt, solve(reduced_rhs(kkt, rhs)), rhs);
}

std::vector<int> matrix_labels(const KktSystem& k, const std::vector<int>& variable,
                               const std::vector<int>& slack, const std::vector<int>& equality,
                               const std::vector<int>& inequality) {
  std::vector<int> labels(k.dim);
  for (int i = 0; i < k.n_x; ++i) labels[i] = variable[i];
  for (int i = 0; i < k.n_i; ++i) {
    if (k.slack_index[i] >= 0) labels[k.slack_index[i]] = slack[i];
    labels[k.offset_ineq + i] = inequality[i];
  }
  for (int i = 0; i < k.n_e; ++i) labels[k.offset_eq + i] = equality[i];
  return labels;
}

RefinementResult iterative_refinement(const KktSystem& kkt, const LinearSolve& solve, Direction d,
                                      const Residuals& rhs, int max_rounds, double tolerance) {
  RefinementResult out;
  Residuals res = rhs;
  res -= apply_unsymmetric(kkt, d);
  double norm = res.norm_inf();
  out.direction = d;
  out.residual = norm;
  for (int round = 0; round < max_rounds && norm > tolerance; ++round) {
    Direction trial = out.direction;
    trial += solve_direction(kkt, solve, res);
    Residuals next = rhs;
    next -= apply_unsymmetric(kkt, trial);
    const double next_norm = next.norm_inf();
    ++out.rounds;
    if (!(next_norm <= 0.9 * norm)) {
      out.stagnated = true;
      if (next_norm < norm) {
        out.direction = std::move(trial);
        out.residual = next_norm;
      }
      break;
    }
    out.direction = std::move(trial);
    out.residual = next_norm;
    res = std::move(next);
    norm = next_norm;
  }
  return out;
}

}  // namespace arrowip
