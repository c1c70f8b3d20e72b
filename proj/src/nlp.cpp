#include "arrowip/nlp.hpp"

#include <cmath>
#include <sstream>

namespace arrowip {

BlockMap BlockMap::single(int n_x, int n_e, int n_i) {
  BlockMap m;
  m.num_blocks = 1;
  m.variable.assign(n_x, 0);
  m.equality.assign(n_e, 0);
  m.inequality.assign(n_i, 0);
  m.slack.assign(n_i, 0);
  return m;
}

std::string BlockMap::check(int n_x, int n_e, int n_i) const {
  if (num_blocks < 1) return "block map has no blocks";
  if (static_cast<int>(variable.size()) != n_x) return "block map variable labels size mismatch";
  if (static_cast<int>(equality.size()) != n_e) return "block map equality labels size mismatch";
  if (static_cast<int>(inequality.size()) != n_i) return "block map inequality labels size mismatch";
  if (static_cast<int>(slack.size()) != n_i) return "block map slack labels size mismatch";
  auto bad = [&](const std::vector<int>& v) {
    for (int l : v) {
      if (l != kCoupling && (l < 0 || l >= num_blocks)) return true;
    }
    return false;
  };
  if (bad(variable) || bad(equality) || bad(inequality) || bad(slack)) {
    return "block map label out of range";
  }
  for (int i = 0; i < n_i; ++i) {
    if (slack[i] == kCoupling && inequality[i] != kCoupling) {
      return "slack of a block row cannot be a coupling index";
    }
  }
  return {};
}

int BlockMap::coupling_variables() const {
  int n = 0;
  for (int l : variable) n += (l == kCoupling);
  return n;
}

std::string ValidationReport::summary() const {
  std::ostringstream os;
  for (std::size_t k = 0; k < findings.size(); ++k) {
    if (k) os << "; ";
    os << findings[k];
  }
  return os.str();
}

ValidationReport validate(const NlpProblem& p) {
  ValidationReport r;
  auto add = [&](std::string s) { r.findings.push_back(std::move(s)); };
  if (p.n_x <= 0) add("problem has no variables");
  if (p.n_e < 0 || p.n_i < 0) add("negative constraint count");
  if (p.x_lower.size() != p.n_x || p.x_upper.size() != p.n_x) add("variable bound size mismatch");
  if (p.c_lower.size() != p.n_i || p.c_upper.size() != p.n_i) {
    add("inequality bound size mismatch");
  }
  if (p.x_start.size() != 0 && p.x_start.size() != p.n_x) add("start point size mismatch");
  if (!p.evaluator) add("missing evaluator");
  if (!r.ok()) return r;

  for (int i = 0; i < p.n_x; ++i) {
    if (std::isnan(p.x_lower[i]) || std::isnan(p.x_upper[i])) {
      add("NaN bound at index " + std::to_string(i));
    } else if (p.x_lower[i] > p.x_upper[i]) {
      add("inverted bound at index " + std::to_string(i));
    } else if (p.x_lower[i] == p.x_upper[i]) {
      add("fixed variable at index " + std::to_string(i));
    }
  }
  for (int i = 0; i < p.n_i; ++i) {
    if (std::isnan(p.c_lower[i]) || std::isnan(p.c_upper[i])) {
      add("NaN constraint bound at index " + std::to_string(i));
    } else if (p.c_lower[i] > p.c_upper[i]) {
      add("inverted constraint bound at index " + std::to_string(i));
    } else if (p.c_lower[i] == p.c_upper[i]) {
      add("inequality with equal bounds at index " + std::to_string(i));
    }
  }

  auto check_pattern = [&](const SparsityPattern& pat, int rows, int cols, const char* name,
                           bool lower) {
    if (pat.rows.size() != pat.cols.size()) {
      add(std::string(name) + " pattern row/col length mismatch");
      return;
    }
    for (std::size_t k = 0; k < pat.size(); ++k) {
      const int rr = pat.rows[k], cc = pat.cols[k];
      if (rr < 0 || rr >= rows || cc < 0 || cc >= cols) {
        add(std::string(name) + " pattern entry " + std::to_string(k) + " out of range");
        return;
      }
      if (lower && rr < cc) {
        add(std::string(name) + " pattern entry " + std::to_string(k) +
            " is above the diagonal");
        return;
      }
    }
  };
  check_pattern(p.evaluator->jacobian_eq_pattern(), p.n_e, p.n_x, "equality Jacobian", false);
  check_pattern(p.evaluator->jacobian_ineq_pattern(), p.n_i, p.n_x, "inequality Jacobian",
                false);
  check_pattern(p.evaluator->hessian_pattern(), p.n_x, p.n_x, "Hessian", true);

  if (p.structure) {
    const std::string msg = p.structure->check(p.n_x, p.n_e, p.n_i);
    if (!msg.empty()) add(msg);
  }
  return r;
}

const char* to_string(EvalStatus s) {
  switch (s) {
    case EvalStatus::ok:
      return "ok";
    case EvalStatus::non_finite:
      return "non-finite";
    case EvalStatus::evaluation_error:
      return "evaluation-error";
  }
  return "?";
}

namespace {

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

void mark(Evaluation& ev, bool call_ok, bool values_finite) {
  if (ev.status != EvalStatus::ok) return;
  if (!call_ok) {
    ev.status = EvalStatus::evaluation_error;
  } else if (!values_finite) {
    ev.status = EvalStatus::non_finite;
  }
}

}  // namespace

Evaluation eval_functions(const NlpProblem& p, const Eigen::VectorXd& x) {
  Evaluation ev;
  const Evaluator& e = *p.evaluator;
  ev.c_eq.resize(p.n_e);
  ev.c_ineq.resize(p.n_i);
  const bool ok_f = e.objective(x, ev.f);
  mark(ev, ok_f, std::isfinite(ev.f));
  const bool ok_c = e.constraints(x, ev.c_eq, ev.c_ineq);
  mark(ev, ok_c, finite(ev.c_eq) && finite(ev.c_ineq));
  return ev;
}

Evaluation eval_first_order(const NlpProblem& p, const Eigen::VectorXd& x) {
  Evaluation ev = eval_functions(p, x);
  const Evaluator& e = *p.evaluator;
  ev.grad.resize(p.n_x);
  ev.j_eq.resize(static_cast<Eigen::Index>(e.jacobian_eq_pattern().size()));
  ev.j_ineq.resize(static_cast<Eigen::Index>(e.jacobian_ineq_pattern().size()));
  const bool ok_g = e.gradient(x, ev.grad);
  mark(ev, ok_g, finite(ev.grad));
  const bool ok_j = e.jacobian(x, ev.j_eq, ev.j_ineq);
  mark(ev, ok_j, finite(ev.j_eq) && finite(ev.j_ineq));
  return ev;
}

void eval_hessian(const NlpProblem& p, const Eigen::VectorXd& x, double obj_factor,
                  const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_ineq,
                  Evaluation& ev) {
  const Evaluator& e = *p.evaluator;
  ev.hess.resize(static_cast<Eigen::Index>(e.hessian_pattern().size()));
  const bool ok = e.hessian(x, obj_factor, lam_eq, lam_ineq, ev.hess);
  mark(ev, ok, finite(ev.hess));
}

Evaluation eval_all(const NlpProblem& p, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& lam_eq, const Eigen::VectorXd& lam_ineq,
                    double obj_factor) {
  Evaluation ev = eval_first_order(p, x);
  eval_hessian(p, x, obj_factor, lam_eq, lam_ineq, ev);
  return ev;
}

SparseMatrix jacobian_matrix(const SparsityPattern& pattern, const Eigen::VectorXd& values,
                             int rows, int cols) {
  std::vector<Triplet> t(pattern.size());
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    t[k] = {pattern.rows[k], pattern.cols[k], values[static_cast<Eigen::Index>(k)]};
  }
  return SparseMatrix::from_triplets(rows, cols, t);
}

SparseSym hessian_matrix(const SparsityPattern& pattern, const Eigen::VectorXd& values, int n) {
  std::vector<Triplet> t(pattern.size());
  for (std::size_t k = 0; k < pattern.size(); ++k) {
    t[k] = {pattern.rows[k], pattern.cols[k], values[static_cast<Eigen::Index>(k)]};
  }
  return SparseSym::from_triplets(n, t);
}

}  // namespace arrowip
