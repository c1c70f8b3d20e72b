#include "arrowip/ipm.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "arrowip/mpopf_schur.hpp"

namespace arrowip {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

// ---------------------------------------------------------------------------
// Names

const char* to_string(MuStrategy s) {
  switch (s) {
    case MuStrategy::monotone:
      return "monotone";
    case MuStrategy::mehrotra:
      return "mehrotra";
    case MuStrategy::quality:
      return "quality";
  }
  return "?";
}

const char* to_string(InertiaMode m) {
  return m == InertiaMode::inertia ? "inertia" : "curvature";
}

const char* to_string(LinearSolverKind k) {
  switch (k) {
    case LinearSolverKind::direct:
      return "direct";
    case LinearSolverKind::schur:
      return "schur";
    case LinearSolverKind::schur_structured:
      return "schur-structured";
  }
  return "?";
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal:
      return "optimal";
    case SolveStatus::max_iter:
      return "max-iter";
    case SolveStatus::restoration_failure:
      return "restoration-failure";
    case SolveStatus::linear_solver_failure:
      return "linear-solver-failure";
  }
  return "?";
}

std::optional<MuStrategy> parse_mu_strategy(const std::string& s) {
  if (s == "monotone") return MuStrategy::monotone;
  if (s == "mehrotra") return MuStrategy::mehrotra;
  if (s == "quality") return MuStrategy::quality;
  return std::nullopt;
}

std::optional<InertiaMode> parse_inertia_mode(const std::string& s) {
  if (s == "inertia") return InertiaMode::inertia;
  if (s == "curvature") return InertiaMode::curvature;
  return std::nullopt;
}

std::optional<LinearSolverKind> parse_linear_solver(const std::string& s) {
  if (s == "direct") return LinearSolverKind::direct;
  if (s == "schur") return LinearSolverKind::schur;
  if (s == "schur-structured") return LinearSolverKind::schur_structured;
  return std::nullopt;
}

std::optional<ScMode> parse_sc_mode(const std::string& s) {
  if (s == "backsolve") return ScMode::backsolve;
  if (s == "augmented") return ScMode::augmented;
  return std::nullopt;
}

std::string IpmOptions::check() const {
  if (!(tol > 0)) return "tol must be positive";
  if (!(dual_inf_tol > 0 && constr_viol_tol > 0 && compl_inf_tol > 0)) {
    return "individual tolerances must be positive";
  }
  if (!(mu0 > 0)) return "mu0 must be positive";
  if (!(kappa_mu > 0 && kappa_mu < 1)) return "kappa_mu must lie in (0,1)";
  if (!(theta_mu > 1 && theta_mu < 2)) return "theta_mu must lie in (1,2)";
  if (!(kappa_eps > 0)) return "kappa_eps must be positive";
  if (!(kappa >= 0)) return "kappa must be non-negative";
  if (!(g_max > 0)) return "g_max must be positive";
  if (!(s_max > 0)) return "s_max must be positive";
  if (!(sigma_min > 0 && sigma_min < sigma_max)) return "sigma interval must satisfy 0 < min < max";
  if (max_iter < 0) return "max_iter must be non-negative";
  if (workers < 1) return "workers must be at least 1";
  if (refinement_rounds < 0) return "refinement_rounds must be non-negative";
  return {};
}

// ---------------------------------------------------------------------------
// Residuals and measures

PointEval evaluate_point(const NlpProblem& p, const Eigen::VectorXd& x) {
  PointEval pe;
  pe.ev = eval_first_order(p, x);
  if (pe.ev.ok()) {
    pe.j_eq = jacobian_matrix(p.evaluator->jacobian_eq_pattern(), pe.ev.j_eq, p.n_e, p.n_x);
    pe.j_ineq = jacobian_matrix(p.evaluator->jacobian_ineq_pattern(), pe.ev.j_ineq, p.n_i, p.n_x);
  }
  return pe;
}

namespace {

/// dual * distance - mu on finite sides, zero elsewhere.
Eigen::VectorXd complementarity(const Eigen::VectorXd& dual, const Eigen::VectorXd& dist,
                                double mu) {
  Eigen::VectorXd r(dual.size());
  for (Eigen::Index i = 0; i < dual.size(); ++i) {
    r[i] = std::isfinite(dist[i]) ? dual[i] * dist[i] - mu : 0.0;
  }
  return r;
}

}  // namespace

Residuals compute_residuals(const Iterate& it, const PointEval& pe, const Bounds& xb,
                            const Bounds& sb, double mu) {
  Residuals r;
  r.a = pe.ev.grad + pe.j_eq.multiply_transpose(it.lam_eq) +
        pe.j_ineq.multiply_transpose(it.lam_ineq) - it.z_lower + it.z_upper;
  r.b = -it.lam_ineq - it.y_lower + it.y_upper;
  r.c = pe.ev.c_eq;
  r.d = pe.ev.c_ineq - it.s;
  r.e_lower = complementarity(it.z_lower, xb.lower_distance(it.x), mu);
  r.e_upper = complementarity(it.z_upper, xb.upper_distance(it.x), mu);
  r.f_lower = complementarity(it.y_lower, sb.lower_distance(it.s), mu);
  r.f_upper = complementarity(it.y_upper, sb.upper_distance(it.s), mu);
  return r;
}

namespace {

struct ProductSum {
  double sum = 0.0;
  int count = 0;
};

void add_products(ProductSum& acc, const Eigen::VectorXd& dual, const Eigen::VectorXd& dist) {
  for (Eigen::Index i = 0; i < dual.size(); ++i) {
    if (std::isfinite(dist[i])) {
      acc.sum += dual[i] * dist[i];
      ++acc.count;
    }
  }
}

double measure(const Eigen::VectorXd& x, const Eigen::VectorXd& s, const Eigen::VectorXd& zl,
               const Eigen::VectorXd& zu, const Eigen::VectorXd& yl, const Eigen::VectorXd& yu,
               const Bounds& xb, const Bounds& sb) {
  ProductSum acc;
  add_products(acc, zl, xb.lower_distance(x));
  add_products(acc, zu, xb.upper_distance(x));
  add_products(acc, yl, sb.lower_distance(s));
  add_products(acc, yu, sb.upper_distance(s));
  if (acc.count == 0) throw std::domain_error("no bounded directions");
  return acc.sum / acc.count;
}

}  // namespace

double duality_measure(const Iterate& it, const Bounds& xb, const Bounds& sb) {
  return measure(it.x, it.s, it.z_lower, it.z_upper, it.y_lower, it.y_upper, xb, sb);
}

ErrorScaling error_scaling(const Iterate& it, const Bounds& xb, const Bounds& sb, double s_max) {
  const double bound_l1 = it.z_lower.lpNorm<1>() + it.z_upper.lpNorm<1>() +
                          it.y_lower.lpNorm<1>() + it.y_upper.lpNorm<1>();
  const double all_l1 = bound_l1 + it.lam_eq.lpNorm<1>() + it.lam_ineq.lpNorm<1>();
  const int sides = xb.finite_sides() + sb.finite_sides();
  const int all = sides + static_cast<int>(it.lam_eq.size() + it.lam_ineq.size());
  ErrorScaling sc;
  sc.s1 = std::max(s_max, all ? all_l1 / all : 0.0) / s_max;
  sc.s2 = std::max(s_max, sides ? bound_l1 / sides : 0.0) / s_max;
  return sc;
}

ErrorParts optimality_error_parts(const Residuals& r, const ErrorScaling& sc) {
  ErrorParts p;
  p.dual = std::max(inf_norm(r.a), inf_norm(r.b)) / sc.s1;
  p.primal = std::max(inf_norm(r.c), inf_norm(r.d));
  p.compl_ = std::max({inf_norm(r.e_lower), inf_norm(r.e_upper), inf_norm(r.f_lower),
                       inf_norm(r.f_upper)}) /
             sc.s2;
  return p;
}

double optimality_error(const Residuals& r, const ErrorScaling& sc) {
  const ErrorParts p = optimality_error_parts(r, sc);
  return std::max({p.dual, p.primal, p.compl_});
}

double fraction_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, const Bounds& b,
                            double tau) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (b.has_lower[i] && dv[i] < 0) {
      alpha = std::min(alpha, -tau * (v[i] - b.lower[i]) / dv[i]);
    }
    if (b.has_upper[i] && dv[i] > 0) {
      alpha = std::min(alpha, tau * (b.upper[i] - v[i]) / dv[i]);
    }
  }
  return alpha;
}

double fraction_to_boundary_dual(const Eigen::VectorXd& z, const Eigen::VectorXd& dz,
                                 const std::vector<char>& mask, double tau) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (mask[i] && dz[i] < 0) alpha = std::min(alpha, -tau * z[i] / dz[i]);
  }
  return alpha;
}

double theta(const Evaluation& ev, const Eigen::VectorXd& s) {
  return ev.c_eq.lpNorm<1>() + (ev.c_ineq - s).lpNorm<1>();
}

namespace {

double log_barrier(const Eigen::VectorXd& v, const Bounds& b) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (b.has_lower[i]) {
      const double d = v[i] - b.lower[i];
      if (!(d > 0)) throw std::domain_error("barrier undefined");
      sum += std::log(d);
    }
    if (b.has_upper[i]) {
      const double d = b.upper[i] - v[i];
      if (!(d > 0)) throw std::domain_error("barrier undefined");
      sum += std::log(d);
    }
  }
  return sum;
}

double barrier_slope(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, const Bounds& b) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (b.has_lower[i]) sum += dv[i] / (v[i] - b.lower[i]);
    if (b.has_upper[i]) sum -= dv[i] / (b.upper[i] - v[i]);
  }
  return sum;
}

}  // namespace

double phi(double f, const Eigen::VectorXd& x, const Eigen::VectorXd& s, const Bounds& xb,
           const Bounds& sb, double mu) {
  return f - mu * (log_barrier(x, xb) + log_barrier(s, sb));
}

// ---------------------------------------------------------------------------
// Filter line search

bool Filter::acceptable(double th, double ph) const {
  if (th > theta_max_) return false;
  for (const auto& [t, p] : entries_) {
    if (th >= t && ph >= p) return false;
  }
  return true;
}

void Filter::add(double th, double ph) {
  std::erase_if(entries_, [&](const auto& e) { return e.first >= th && e.second >= ph; });
  entries_.emplace_back(th, ph);
}

LineSearchResult filter_line_search(const LineSearchProblem& p, Filter& filter, double alpha_max,
                                    const LineSearchConstants& c) {
  LineSearchResult out;
  for (int i = 0; i < c.max_backtracks; ++i) {
    const double alpha = alpha_max * std::ldexp(1.0, -i);
    ++out.trials;
    const auto t = p.trial(alpha);
    if (!t) continue;
    const auto [th, ph] = *t;
    if (!std::isfinite(th) || !std::isfinite(ph)) continue;
    if (!filter.acceptable(th, ph)) continue;

    const bool switching =
        p.grad_phi_dot_d < 0 &&
        alpha * std::pow(-p.grad_phi_dot_d, c.s_phi) > c.delta * std::pow(p.theta, c.s_theta);
    if (p.theta <= c.theta_min && switching) {
      if (ph <= p.phi + c.eta_phi * alpha * p.grad_phi_dot_d) {
        out = {true, alpha, out.trials, true, th, ph};
        return out;
      }
      continue;
    }
    if (th <= (1.0 - c.gamma_theta) * p.theta || ph <= p.phi - c.gamma_phi * p.theta) {
      if (p.theta > 0) {
        filter.add((1.0 - c.gamma_theta) * p.theta, p.phi - c.gamma_phi * p.theta);
      }
      out = {true, alpha, out.trials, false, th, ph};
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Curvature test

bool curvature_test(const Eigen::VectorXd& d, const Eigen::MatrixXd& w, double delta,
                    double kappa) {
  const double dd = d.squaredNorm();
  return d.dot(w * d) + delta * dd >= kappa * dd;
}

bool curvature_test(const KktSystem& kkt, const Direction& d, double delta, double kappa) {
  const double dd = d.x.squaredNorm() + d.s.squaredNorm();
  const double curv = d.x.dot(kkt.hessian.multiply(d.x)) +
                      d.x.dot(kkt.sigma_x.cwiseProduct(d.x)) +
                      d.s.dot(kkt.sigma_s.cwiseProduct(d.s));
  return curv + delta * dd >= kappa * dd;
}

// ---------------------------------------------------------------------------
// Barrier parameter

double update_mu_monotone(double mu, double tol, double kappa_mu, double theta_mu) {
  return std::max(tol / 10.0, std::min(kappa_mu * mu, std::pow(mu, theta_mu)));
}

double mehrotra_sigma(double tau_affine, double tau) {
  const double r = tau_affine / tau;
  return r * r * r;
}

namespace {

double primal_step(const Iterate& it, const Direction& d, const Bounds& xb, const Bounds& sb,
                   double tau) {
  return std::min(fraction_to_boundary(it.x, d.x, xb, tau),
                  fraction_to_boundary(it.s, d.s, sb, tau));
}

double dual_step(const Iterate& it, const Direction& d, const Bounds& xb, const Bounds& sb,
                 double tau) {
  return std::min({fraction_to_boundary_dual(it.z_lower, d.z_lower, xb.has_lower, tau),
                   fraction_to_boundary_dual(it.z_upper, d.z_upper, xb.has_upper, tau),
                   fraction_to_boundary_dual(it.y_lower, d.y_lower, sb.has_lower, tau),
                   fraction_to_boundary_dual(it.y_upper, d.y_upper, sb.has_upper, tau)});
}

}  // namespace

double update_mu_mehrotra(const Iterate& it, const Direction& aff, const Bounds& xb,
                          const Bounds& sb, double mu_min, double mu_max) {
  const double tau = duality_measure(it, xb, sb);
  const double ap = primal_step(it, aff, xb, sb, 1.0);
  const double ad = dual_step(it, aff, xb, sb, 1.0);
  const double tau_aff =
      measure(it.x + ap * aff.x, it.s + ap * aff.s, it.z_lower + ad * aff.z_lower,
              it.z_upper + ad * aff.z_upper, it.y_lower + ad * aff.y_lower,
              it.y_upper + ad * aff.y_upper, xb, sb);
  const double sigma = mehrotra_sigma(std::max(0.0, tau_aff), tau);
  return std::clamp(sigma * tau, mu_min, mu_max);
}

GoldenSectionResult golden_section(const std::function<double(double)>& q, double lo, double hi,
                                   int steps) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = q(c), fd = q(d);
  GoldenSectionResult out;
  for (int k = 0; k < steps; ++k) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = q(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = q(d);
    }
    ++out.sections;
  }
  out.sigma = 0.5 * (a + b);
  return out;
}

QualityResult update_mu_quality(const Iterate& it, const Residuals& r,
                                const std::function<Direction(double)>& direction,
                                const Bounds& xb, const Bounds& sb, const ErrorScaling& sc,
                                double sigma_min, double sigma_max, double mu_min,
                                double mu_max) {
  const double tau = duality_measure(it, xb, sb);
  const double dual = std::max(inf_norm(r.a), inf_norm(r.b)) / sc.s1;
  const double primal = std::max(inf_norm(r.c), inf_norm(r.d));
  const double tau_ftb = std::max(0.99, 1.0 - tau);
  auto q = [&](double sigma) {
    const Direction d = direction(sigma);
    const double ap = primal_step(it, d, xb, sb, tau_ftb);
    const double ad = dual_step(it, d, xb, sb, tau_ftb);
    const Eigen::VectorXd x = it.x + ap * d.x, s = it.s + ap * d.s;
    double comp = 0.0;
    auto side = [&](const Eigen::VectorXd& dual_v, const Eigen::VectorXd& ddual,
                    const Eigen::VectorXd& dist) {
      for (Eigen::Index i = 0; i < dist.size(); ++i) {
        if (std::isfinite(dist[i])) {
          comp = std::max(comp, std::abs((dual_v[i] + ad * ddual[i]) * dist[i]));
        }
      }
    };
    side(it.z_lower, d.z_lower, xb.lower_distance(x));
    side(it.z_upper, d.z_upper, xb.upper_distance(x));
    side(it.y_lower, d.y_lower, sb.lower_distance(s));
    side(it.y_upper, d.y_upper, sb.upper_distance(s));
    return std::max({(1.0 - ad) * dual, (1.0 - ap) * primal, comp / sc.s2});
  };
  const GoldenSectionResult g = golden_section(q, sigma_min, sigma_max, 12);
  QualityResult out;
  out.sigma = g.sigma;
  out.sections = g.sections;
  out.mu = std::clamp(g.sigma * tau, mu_min, mu_max);
  return out;
}

// ---------------------------------------------------------------------------
// Scaling and initialization

Scaling compute_scaling(const NlpProblem& p, const Eigen::VectorXd& x0, double g_max) {
  Scaling sc;
  sc.s_g = Eigen::VectorXd::Ones(p.n_e);
  sc.s_h = Eigen::VectorXd::Ones(p.n_i);
  const Evaluation ev = eval_first_order(p, x0);
  if (!ev.ok()) return sc;
  auto factor = [&](double norm) { return norm > 0 ? std::min(1.0, g_max / norm) : 1.0; };
  sc.s_f = factor(inf_norm(ev.grad));
  auto rows = [&](const SparsityPattern& pat, const Eigen::VectorXd& vals, Eigen::VectorXd& out) {
    Eigen::VectorXd norm = Eigen::VectorXd::Zero(out.size());
    for (std::size_t k = 0; k < pat.size(); ++k) {
      norm[pat.rows[k]] = std::max(norm[pat.rows[k]], std::abs(vals[static_cast<Eigen::Index>(k)]));
    }
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = factor(norm[i]);
  };
  rows(p.evaluator->jacobian_eq_pattern(), ev.j_eq, sc.s_g);
  rows(p.evaluator->jacobian_ineq_pattern(), ev.j_ineq, sc.s_h);
  return sc;
}

namespace {

class ScaledEvaluator : public Evaluator {
 public:
  ScaledEvaluator(std::shared_ptr<const Evaluator> inner, Scaling sc)
      : inner_(std::move(inner)), sc_(std::move(sc)) {
    const auto& pe = inner_->jacobian_eq_pattern();
    const auto& pi = inner_->jacobian_ineq_pattern();
    eq_scale_.resize(static_cast<Eigen::Index>(pe.size()));
    ineq_scale_.resize(static_cast<Eigen::Index>(pi.size()));
    for (std::size_t k = 0; k < pe.size(); ++k) eq_scale_[static_cast<Eigen::Index>(k)] = sc_.s_g[pe.rows[k]];
    for (std::size_t k = 0; k < pi.size(); ++k) ineq_scale_[static_cast<Eigen::Index>(k)] = sc_.s_h[pi.rows[k]];
  }

  const SparsityPattern& jacobian_eq_pattern() const override {
    return inner_->jacobian_eq_pattern();
  }
  const SparsityPattern& jacobian_ineq_pattern() const override {
    return inner_->jacobian_ineq_pattern();
  }
  const SparsityPattern& hessian_pattern() const override { return inner_->hessian_pattern(); }

  bool objective(const Eigen::VectorXd& x, double& f) const override {
    if (!inner_->objective(x, f)) return false;
    f *= sc_.s_f;
    return true;
  }
  bool gradient(const Eigen::VectorXd& x, Eigen::VectorXd& g) const override {
    if (!inner_->gradient(x, g)) return false;
    g *= sc_.s_f;
    return true;
  }
  bool constraints(const Eigen::VectorXd& x, Eigen::VectorXd& ce,
                   Eigen::VectorXd& ci) const override {
    if (!inner_->constraints(x, ce, ci)) return false;
    ce = ce.cwiseProduct(sc_.s_g);
    ci = ci.cwiseProduct(sc_.s_h);
    return true;
  }
  bool jacobian(const Eigen::VectorXd& x, Eigen::VectorXd& je,
                Eigen::VectorXd& ji) const override {
    if (!inner_->jacobian(x, je, ji)) return false;
    je = je.cwiseProduct(eq_scale_);
    ji = ji.cwiseProduct(ineq_scale_);
    return true;
  }
  bool hessian(const Eigen::VectorXd& x, double obj_factor, const Eigen::VectorXd& le,
               const Eigen::VectorXd& li, Eigen::VectorXd& h) const override {
    return inner_->hessian(x, obj_factor * sc_.s_f, le.cwiseProduct(sc_.s_g),
                           li.cwiseProduct(sc_.s_h), h);
  }

 private:
  std::shared_ptr<const Evaluator> inner_;
  Scaling sc_;
  Eigen::VectorXd eq_scale_, ineq_scale_;
};

}  // namespace

NlpProblem scaled_problem(const NlpProblem& p, const Scaling& sc) {
  NlpProblem out = p;
  out.evaluator = std::make_shared<ScaledEvaluator>(p.evaluator, sc);
  out.c_lower = p.c_lower.cwiseProduct(sc.s_h);
  out.c_upper = p.c_upper.cwiseProduct(sc.s_h);
  return out;
}

Eigen::VectorXd push_inside(const Eigen::VectorXd& v, const Bounds& b, double k1, double k2) {
  Eigen::VectorXd out = v;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const bool lo = b.has_lower[i], up = b.has_upper[i];
    const double width = lo && up ? b.upper[i] - b.lower[i] : kInf;
    if (lo) {
      const double p = std::min(k1 * std::max(1.0, std::abs(b.lower[i])), k2 * width);
      out[i] = std::max(out[i], b.lower[i] + p);
    }
    if (up) {
      const double p = std::min(k1 * std::max(1.0, std::abs(b.upper[i])), k2 * width);
      out[i] = std::min(out[i], b.upper[i] - p);
    }
  }
  return out;
}

namespace {

Eigen::VectorXd dual_from(double mu, const Eigen::VectorXd& dist) {
  Eigen::VectorXd z(dist.size());
  for (Eigen::Index i = 0; i < dist.size(); ++i) z[i] = std::isfinite(dist[i]) ? mu / dist[i] : 0.0;
  return z;
}

}  // namespace

Iterate initialize_iterate(const NlpProblem& p, const IpmOptions& options) {
  const Bounds xb(p.x_lower, p.x_upper), sb(p.c_lower, p.c_upper);
  Iterate it;
  static_cast<PrimalDual&>(it) = PrimalDual::zeros(p.n_x, p.n_e, p.n_i);
  it.mu = options.mu0;
  it.x = push_inside(p.x_start.size() ? p.x_start : Eigen::VectorXd::Zero(p.n_x), xb);
  if (p.n_i > 0) {
    const Evaluation ev = eval_functions(p, it.x);
    it.s = push_inside(ev.ok() ? ev.c_ineq : Eigen::VectorXd::Zero(p.n_i), sb);
  }
  it.z_lower = dual_from(options.mu0, xb.lower_distance(it.x));
  it.z_upper = dual_from(options.mu0, xb.upper_distance(it.x));
  it.y_lower = dual_from(options.mu0, sb.lower_distance(it.s));
  it.y_upper = dual_from(options.mu0, sb.upper_distance(it.s));
  return it;
}

// ---------------------------------------------------------------------------
// Backends

namespace {

class DirectBackend : public KktBackend {
 public:
  Inertia factor(const KktSystem& kkt, PhaseTimes* times) override {
    const auto t0 = Clock::now();
    f_ = SymIndefFactor::factor(kkt.matrix);
    if (times) times->local_solve += seconds_since(t0);
    return f_.inertia();
  }
  bool singular() const override { return f_.singular(); }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, PhaseTimes* times) const override {
    const auto t0 = Clock::now();
    Eigen::VectorXd x = f_.solve(rhs);
    if (times) times->local_solve += seconds_since(t0);
    return x;
  }

 private:
  SymIndefFactor f_;
};

template <class Factorization>
class SchurBackend : public KktBackend {
 public:
  SchurBackend(SchurOptions options, BlockMap map)
      : options_(options), map_(std::move(map)) {}

  Inertia factor(const KktSystem& kkt, PhaseTimes* times) override {
    const auto labels =
        matrix_labels(kkt, map_.variable, map_.slack, map_.equality, map_.inequality);
    f_.reset();
    system_ = std::make_unique<ArrowheadSystem>(
        permute_to_arrowhead(kkt.matrix, labels, map_.num_blocks));
    f_.emplace(Factorization::factor(*system_, options_, times));
    return f_->inertia();
  }
  bool singular() const override { return !f_ || f_->singular(); }
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs, PhaseTimes* times) const override {
    return f_->solve(rhs, times);
  }
  std::optional<std::uint64_t> schur_checksum() const override {
    if (!f_ || f_->singular()) return std::nullopt;
    return f_->schur_checksum();
  }

 private:
  SchurOptions options_;
  BlockMap map_;
  std::unique_ptr<ArrowheadSystem> system_;
  std::optional<Factorization> f_;
};

}  // namespace

std::unique_ptr<KktBackend> make_backend(LinearSolverKind kind, const SchurOptions& options,
                                         const BlockMap& map) {
  switch (kind) {
    case LinearSolverKind::direct:
      return std::make_unique<DirectBackend>();
    case LinearSolverKind::schur:
      return std::make_unique<SchurBackend<SchurFactorization>>(options, map);
    case LinearSolverKind::schur_structured:
      return std::make_unique<SchurBackend<StructuredSchurFactorization>>(options, map);
  }
  return nullptr;
}

CorrectionResult inertia_correction(KktSystem& kkt, KktBackend& backend,
                                    RegularizationState& state, double mu, PhaseTimes* times,
                                    const RegularizationConstants& c) {
  CorrectionResult out;
  const Inertia target = kkt.target_inertia();
  auto attempt = [&](double dw, double dc) {
    kkt.set_regularization(dw, dc);
    out.inertia = backend.factor(kkt, times);
    ++out.factorizations;
    out.delta_w = dw;
    out.delta_c = dc;
    return out.inertia == target && !backend.singular();
  };
  if (attempt(0.0, 0.0)) {
    out.ok = true;
    return out;
  }
  double dc = 0.0;
  if (out.inertia.zero > 0 || backend.singular()) {
    dc = c.delta_c_bar * std::pow(mu, c.kappa_c);
    if (attempt(0.0, dc)) {
      out.ok = true;
      return out;
    }
  }
  double dw = state.last_delta_w == 0.0 ? c.delta_w0
                                        : std::max(c.delta_w_min, c.kappa_minus * state.last_delta_w);
  const double grow = state.last_delta_w == 0.0 ? c.kappa_plus_first : c.kappa_plus;
  while (dw <= c.delta_w_max) {
    if (attempt(dw, dc)) {
      state.last_delta_w = dw;
      out.ok = true;
      return out;
    }
    if (dc == 0.0 && (out.inertia.zero > 0 || backend.singular())) {
      dc = c.delta_c_bar * std::pow(mu, c.kappa_c);
      continue;
    }
    dw *= grow;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Driver

namespace {

constexpr double kSafeguard = 1e10;  // bound-dual safeguard factor
constexpr int kRestorationSteps = 20;

bool is_adaptive(MuStrategy s) { return s != MuStrategy::monotone; }

void safeguard_duals(Eigen::VectorXd& z, const Eigen::VectorXd& dist, double mu) {
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!std::isfinite(dist[i])) continue;
    z[i] = std::clamp(z[i], mu / (kSafeguard * dist[i]), kSafeguard * mu / dist[i]);
  }
}

struct Context {
  NlpProblem sp;
  Bounds xb, sb;
  Scaling scaling;
  IpmOptions opt;
  BlockMap map;
  std::vector<char> keep;
  std::unique_ptr<KktBackend> backend;
  RegularizationState reg;
  PhaseTimes times;
};

bool eval_point(Context& c, const Eigen::VectorXd& x, PointEval& pe) {
  const auto t0 = Clock::now();
  pe = evaluate_point(c.sp, x);
  c.times.function_eval += seconds_since(t0);
  return pe.ev.ok();
}

std::optional<SparseSym> lagrangian_hessian(Context& c, const Iterate& it) {
  const auto t0 = Clock::now();
  Evaluation ev;
  eval_hessian(c.sp, it.x, 1.0, it.lam_eq, it.lam_ineq, ev);
  c.times.function_eval += seconds_since(t0);
  if (!ev.ok()) return std::nullopt;
  return hessian_matrix(c.sp.evaluator->hessian_pattern(), ev.hess, c.sp.n_x);
}

KktSystem assemble(Context& c, const Iterate& it, const SparseSym& h, const PointEval& pe) {
  const auto t0 = Clock::now();
  KktSystem k = assemble_symmetric(it, c.xb, c.sb, h, pe.j_eq, pe.j_ineq, 0.0, 0.0);
  if (c.opt.reduce_slacks) k = reduce_slacks(k, 1e-8, c.keep);
  c.times.kkt_assembly += seconds_since(t0);
  return k;
}

Direction solve_rhs(Context& c, const KktSystem& k, const Residuals& rhs) {
  const LinearSolve ls = [&](const Eigen::VectorXd& b) { return c.backend->solve(b, &c.times); };
  Direction d = solve_direction(k, ls, rhs);
  if (c.opt.refinement_rounds > 0) {
    d = iterative_refinement(k, ls, std::move(d), rhs, c.opt.refinement_rounds,
                             1e-10 * (1.0 + rhs.norm_inf()))
            .direction;
  }
  return d;
}

/// Regularizes until the probe direction passes the curvature test.
bool factorize_curvature(Context& c, KktSystem& k, double mu, const Residuals& probe,
                         std::optional<Direction>& probe_dir) {
  const RegularizationConstants rc;
  double dc = 0.0;
  k.set_regularization(0.0, 0.0);
  c.backend->factor(k, &c.times);
  if (c.backend->singular()) {
    dc = rc.delta_c_bar * std::pow(mu, rc.kappa_c);
    k.set_regularization(0.0, dc);
    c.backend->factor(k, &c.times);
  }
  double dw = 0.0;
  const double last = c.reg.last_delta_w;
  const double grow = last == 0.0 ? rc.kappa_plus_first : rc.kappa_plus;
  for (;;) {
    if (!c.backend->singular()) {
      Direction d = solve_rhs(c, k, probe);
      const double norm = std::sqrt(d.x.squaredNorm() + d.s.squaredNorm());
      if (curvature_test(k, d, dw, c.opt.kappa * std::max(1.0, norm))) {
        if (dw > 0) c.reg.last_delta_w = dw;
        probe_dir = std::move(d);
        return true;
      }
    }
    dw = dw == 0.0 ? (last == 0.0 ? rc.delta_w0 : std::max(rc.delta_w_min, rc.kappa_minus * last))
                   : dw * grow;
    if (dw > rc.delta_w_max) return false;
    k.set_regularization(dw, dc);
    c.backend->factor(k, &c.times);
  }
}

SparseSym scaled_identity(int n, double v) {
  std::vector<Triplet> t;
  t.reserve(n);
  for (int i = 0; i < n; ++i) t.push_back({i, i, v});
  return SparseSym::from_triplets(n, t);
}

/// Minimum-norm steps toward the linearized constraints until the point
/// reduces theta enough to be acceptable to the filter.
bool restore(Context& c, Iterate& it, PointEval& pe, double mu, const Filter& filter) {
  const double theta0 = theta(pe.ev, it.s);
  if (!(theta0 > 0)) return false;
  const double zeta = std::sqrt(mu);
  for (int step = 0; step < kRestorationSteps; ++step) {
    const double th = theta(pe.ev, it.s);
    KktSystem k = assemble(c, it, scaled_identity(c.sp.n_x, zeta), pe);
    if (!inertia_correction(k, *c.backend, c.reg, mu, &c.times).ok) return false;
    Residuals rhs = Residuals::zeros(c.sp.n_x, c.sp.n_e, c.sp.n_i);
    rhs.c = -pe.ev.c_eq;
    rhs.d = -(pe.ev.c_ineq - it.s);
    const Direction d = solve_rhs(c, k, rhs);
    const double tau = std::max(0.99, 1.0 - mu);
    const double amax = primal_step(it, d, c.xb, c.sb, tau);
    const double az = dual_step(it, d, c.xb, c.sb, tau);
    double alpha = -1.0;
    for (int j = 0; j < 30; ++j) {
      const double a = amax * std::ldexp(1.0, -j);
      const Eigen::VectorXd xt = it.x + a * d.x, st = it.s + a * d.s;
      if (!c.xb.strictly_inside(xt) || !c.sb.strictly_inside(st)) continue;
      const auto t0 = Clock::now();
      const Evaluation ev = eval_functions(c.sp, xt);
      c.times.function_eval += seconds_since(t0);
      if (ev.ok() && theta(ev, st) <= (1.0 - 1e-4 * a) * th) {
        alpha = a;
        break;
      }
    }
    if (alpha < 0) return false;
    it.x += alpha * d.x;
    it.s += alpha * d.s;
    it.z_lower += az * d.z_lower;
    it.z_upper += az * d.z_upper;
    it.y_lower += az * d.y_lower;
    it.y_upper += az * d.y_upper;
    safeguard_duals(it.z_lower, c.xb.lower_distance(it.x), mu);
    safeguard_duals(it.z_upper, c.xb.upper_distance(it.x), mu);
    safeguard_duals(it.y_lower, c.sb.lower_distance(it.s), mu);
    safeguard_duals(it.y_upper, c.sb.upper_distance(it.s), mu);
    if (!eval_point(c, it.x, pe)) return false;
    const double tn = theta(pe.ev, it.s);
    if (tn <= 0.9 * theta0 && filter.acceptable(tn, phi(pe.ev.f, it.x, it.s, c.xb, c.sb, mu))) {
      return true;
    }
  }
  return false;
}

bool tiny_step(const Iterate& it, const Direction& d) {
  const double eps = 10.0 * std::numeric_limits<double>::epsilon();
  for (Eigen::Index i = 0; i < d.x.size(); ++i) {
    if (std::abs(d.x[i]) > eps * (1.0 + std::abs(it.x[i]))) return false;
  }
  for (Eigen::Index i = 0; i < d.s.size(); ++i) {
    if (std::abs(d.s[i]) > eps * (1.0 + std::abs(it.s[i]))) return false;
  }
  return true;
}

Iterate unscale(const Iterate& it, const Scaling& sc) {
  Iterate u = it;
  u.s = it.s.cwiseQuotient(sc.s_h);
  u.lam_eq = it.lam_eq.cwiseProduct(sc.s_g) / sc.s_f;
  u.lam_ineq = it.lam_ineq.cwiseProduct(sc.s_h) / sc.s_f;
  u.z_lower = it.z_lower / sc.s_f;
  u.z_upper = it.z_upper / sc.s_f;
  u.y_lower = it.y_lower.cwiseProduct(sc.s_h) / sc.s_f;
  u.y_upper = it.y_upper.cwiseProduct(sc.s_h) / sc.s_f;
  return u;
}

}  // namespace

ConvergenceReport solve(const NlpProblem& problem, const IpmOptions& options) {
  const ValidationReport v = validate(problem);
  if (!v.ok()) throw std::invalid_argument("invalid problem: " + v.summary());
  if (const std::string m = options.check(); !m.empty()) {
    throw std::invalid_argument("invalid options: " + m);
  }
  const auto start = Clock::now();

  Context c;
  c.opt = options;
  c.xb = Bounds(problem.x_lower, problem.x_upper);
  const Eigen::VectorXd x0 = push_inside(
      problem.x_start.size() ? problem.x_start : Eigen::VectorXd::Zero(problem.n_x), c.xb);
  c.scaling = compute_scaling(problem, x0, options.g_max);
  c.sp = scaled_problem(problem, c.scaling);
  c.sp.x_start = x0;
  c.sb = Bounds(c.sp.c_lower, c.sp.c_upper);
  c.map = problem.structure ? *problem.structure
                            : BlockMap::single(problem.n_x, problem.n_e, problem.n_i);
  c.keep.assign(problem.n_i, 0);
  for (int i = 0; i < problem.n_i; ++i) c.keep[i] = c.map.slack[i] != c.map.inequality[i];
  SchurOptions so;
  so.mode = options.sc_mode;
  so.workers = options.workers;
  so.memory_saving = options.memory_saving;
  c.backend = make_backend(options.linear_solver, so, c.map);

  Iterate it = initialize_iterate(c.sp, options);
  double mu = options.mu0;
  PointEval pe;
  if (!eval_point(c, it.x, pe)) {
    throw std::runtime_error(std::string("evaluation failed at the start point: ") +
                             to_string(pe.ev.status));
  }
  const double theta0 = theta(pe.ev, it.s);
  LineSearchConstants lc;
  lc.theta_min = 1e-4 * std::max(1.0, theta0);
  Filter filter(1e4 * std::max(1.0, theta0));
  MuStrategy strategy = options.mu_strategy;
  const double mu_tol = std::min(options.tol, options.compl_inf_tol);
  const double mu_min = mu_tol / 10.0, mu_max = 1e5;
  const int bound_sides = c.xb.finite_sides() + c.sb.finite_sides();

  ConvergenceReport report;
  c.times.init = seconds_since(start);
  double alpha = 0.0, logged_dw = 0.0, sigma = std::numeric_limits<double>::quiet_NaN();
  int sections = 0;

  for (int iter = 0;; ++iter) {
    const Residuals res0 = compute_residuals(it, pe, c.xb, c.sb, 0.0);
    const ErrorScaling sc = error_scaling(it, c.xb, c.sb, options.s_max);
    const double e0 = optimality_error(res0, sc);
    LogRow row;
    row.iter = iter;
    row.objective = pe.ev.f / c.scaling.s_f;
    row.inf_pr = std::max(inf_norm(res0.c), inf_norm(res0.d));
    row.inf_du = std::max(inf_norm(res0.a), inf_norm(res0.b)) / sc.s1;
    row.mu = mu;
    row.alpha = alpha;
    row.delta_w = logged_dw;
    row.sigma = sigma;
    row.sections = sections;
    report.log.push_back(row);
    report.error = e0;
    const ErrorParts parts = optimality_error_parts(res0, sc);
    if (e0 <= options.tol && parts.dual <= options.dual_inf_tol &&
        parts.primal <= options.constr_viol_tol && parts.compl_ <= options.compl_inf_tol) {
      report.status = SolveStatus::optimal;
      break;
    }
    if (iter >= options.max_iter) {
      report.status = SolveStatus::max_iter;
      report.message = "iteration limit reached";
      break;
    }

    if (strategy == MuStrategy::monotone) {
      while (mu > mu_min) {
        const double e_mu =
            optimality_error(compute_residuals(it, pe, c.xb, c.sb, mu), sc);
        if (e_mu > options.kappa_eps * mu) break;
        const double next =
            update_mu_monotone(mu, mu_tol, options.kappa_mu, options.theta_mu);
        if (!(next < mu)) break;
        mu = next;
        filter.reset();
      }
    }

    const auto hess = lagrangian_hessian(c, it);
    if (!hess) {
      report.status = SolveStatus::restoration_failure;
      report.message = "Hessian evaluation failed";
      break;
    }
    KktSystem kkt = assemble(c, it, *hess, pe);

    Direction d;
    sigma = std::numeric_limits<double>::quiet_NaN();
    sections = 0;
    try {
      const Residuals probe =
          strategy == MuStrategy::monotone ? -compute_residuals(it, pe, c.xb, c.sb, mu) : -res0;
      std::optional<Direction> probe_dir;
      bool ok;
      if (options.inertia_mode == InertiaMode::inertia) {
        ok = inertia_correction(kkt, *c.backend, c.reg, mu, &c.times).ok;
      } else {
        ok = factorize_curvature(c, kkt, mu, probe, probe_dir);
      }
      if (!ok) {
        report.status = SolveStatus::linear_solver_failure;
        report.message = "regularization exceeded its cap";
        break;
      }
      logged_dw = kkt.delta_w;
      if (kkt.delta_w > 0) ++report.regularizations;
      const Direction first = probe_dir ? *probe_dir : solve_rhs(c, kkt, probe);

      if (strategy == MuStrategy::monotone || bound_sides == 0) {
        d = first;
      } else {
        const double tau = duality_measure(it, c.xb, c.sb);
        double next = mu;
        if (strategy == MuStrategy::mehrotra) {
          next = update_mu_mehrotra(it, first, c.xb, c.sb, mu_min, mu_max);
          Residuals rhs = -compute_residuals(it, pe, c.xb, c.sb, next);
          rhs.e_lower -= first.z_lower.cwiseProduct(first.x);
          rhs.e_upper += first.z_upper.cwiseProduct(first.x);
          rhs.f_lower -= first.y_lower.cwiseProduct(first.s);
          rhs.f_upper += first.y_upper.cwiseProduct(first.s);
          d = solve_rhs(c, kkt, rhs);
          sigma = next / tau;
        } else {
          Residuals centering = Residuals::zeros(c.sp.n_x, c.sp.n_e, c.sp.n_i);
          auto fill = [&](Eigen::VectorXd& v, const std::vector<char>& has) {
            for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = has[i] ? tau : 0.0;
          };
          fill(centering.e_lower, c.xb.has_lower);
          fill(centering.e_upper, c.xb.has_upper);
          fill(centering.f_lower, c.sb.has_lower);
          fill(centering.f_upper, c.sb.has_upper);
          const Direction center = solve_rhs(c, kkt, centering);
          auto combined = [&](double s) {
            Direction t = center;
            t *= s;
            t += first;
            return t;
          };
          const QualityResult q =
              update_mu_quality(it, res0, combined, c.xb, c.sb, sc, options.sigma_min,
                                options.sigma_max, mu_min, mu_max);
          next = q.mu;
          d = combined(next / tau);
          sigma = q.sigma;
          sections = q.sections;
        }
        if (next != mu) {
          mu = next;
          filter.reset();
        }
      }
    } catch (const SingularFactorization& e) {
      report.status = SolveStatus::linear_solver_failure;
      report.message = e.what();
      break;
    } catch (const StructureViolation& e) {
      report.status = SolveStatus::linear_solver_failure;
      report.message = e.what();
      break;
    }

    const double tau_ftb = std::max(0.99, 1.0 - mu);
    const double amax = primal_step(it, d, c.xb, c.sb, tau_ftb);
    const double az = dual_step(it, d, c.xb, c.sb, tau_ftb);

    LineSearchProblem lp;
    lp.theta = theta(pe.ev, it.s);
    lp.phi = phi(pe.ev.f, it.x, it.s, c.xb, c.sb, mu);
    lp.grad_phi_dot_d = pe.ev.grad.dot(d.x) -
                        mu * (barrier_slope(it.x, d.x, c.xb) + barrier_slope(it.s, d.s, c.sb));
    lp.trial = [&](double a) -> std::optional<std::pair<double, double>> {
      const Eigen::VectorXd xt = it.x + a * d.x, st = it.s + a * d.s;
      if (!c.xb.strictly_inside(xt) || !c.sb.strictly_inside(st)) return std::nullopt;
      const auto t0 = Clock::now();
      const Evaluation ev = eval_functions(c.sp, xt);
      c.times.function_eval += seconds_since(t0);
      if (!ev.ok()) return std::nullopt;
      return std::make_pair(theta(ev, st), phi(ev.f, xt, st, c.xb, c.sb, mu));
    };

    bool accepted = false;
    if (tiny_step(it, d)) {
      accepted = true;
      alpha = amax;
    } else {
      const LineSearchResult ls = filter_line_search(lp, filter, amax, lc);
      accepted = ls.accepted;
      alpha = ls.alpha;
    }

    if (accepted) {
      it.x += alpha * d.x;
      it.s += alpha * d.s;
      it.lam_eq += alpha * d.lam_eq;
      it.lam_ineq += alpha * d.lam_ineq;
      it.z_lower += az * d.z_lower;
      it.z_upper += az * d.z_upper;
      it.y_lower += az * d.y_lower;
      it.y_upper += az * d.y_upper;
      safeguard_duals(it.z_lower, c.xb.lower_distance(it.x), mu);
      safeguard_duals(it.z_upper, c.xb.upper_distance(it.x), mu);
      safeguard_duals(it.y_lower, c.sb.lower_distance(it.s), mu);
      safeguard_duals(it.y_upper, c.sb.upper_distance(it.s), mu);
      if (!eval_point(c, it.x, pe)) {
        report.status = SolveStatus::restoration_failure;
        report.message = "derivative evaluation failed at an accepted point";
        break;
      }
    } else {
      ++report.restorations;
      if (is_adaptive(strategy)) {
        strategy = MuStrategy::monotone;
        report.mu_fallback = true;
      }
      if (lp.theta > 0) filter.add(lp.theta, lp.phi);
      bool restored = false;
      try {
        restored = restore(c, it, pe, mu, filter);
      } catch (const SingularFactorization&) {
        restored = false;
      }
      if (!restored) {
        report.status = SolveStatus::restoration_failure;
        report.message = "line search failed and restoration could not reduce infeasibility";
        break;
      }
      alpha = 0.0;
    }
    it.mu = mu;
  }

  it.mu = mu;
  report.iterations = static_cast<int>(report.log.size()) - 1;
  report.iterate = unscale(it, c.scaling);
  report.objective = pe.ev.f / c.scaling.s_f;
  report.times = c.times;
  report.schur_checksum = c.backend->schur_checksum();
  return report;
}

}  // namespace arrowip
