#pragma once

// Primal-dual interior-point driver with a filter line search.

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "arrowip/iterate.hpp"
#include "arrowip/kkt.hpp"
#include "arrowip/nlp.hpp"
#include "arrowip/schur.hpp"

namespace arrowip {

enum class MuStrategy { monotone, mehrotra, quality };
enum class InertiaMode { inertia, curvature };
enum class LinearSolverKind { direct, schur, schur_structured };
enum class SolveStatus { optimal, max_iter, restoration_failure, linear_solver_failure };

const char* to_string(MuStrategy s);
const char* to_string(InertiaMode m);
const char* to_string(LinearSolverKind k);
const char* to_string(SolveStatus s);
std::optional<MuStrategy> parse_mu_strategy(const std::string& s);
std::optional<InertiaMode> parse_inertia_mode(const std::string& s);
std::optional<LinearSolverKind> parse_linear_solver(const std::string& s);
std::optional<ScMode> parse_sc_mode(const std::string& s);

struct IpmOptions {
  double tol = 1e-6;
  /// Separate limits on the dual, primal and complementarity terms of the
  /// scaled error, checked together with tol. The monotone barrier floor is
  /// min(tol, compl_inf_tol) / 10.
  double dual_inf_tol = 1.0;
  double constr_viol_tol = 1e-4;
  double compl_inf_tol = 1e-4;
  double mu0 = 0.1;
  MuStrategy mu_strategy = MuStrategy::monotone;
  double kappa_eps = 10.0;
  double kappa_mu = 0.2;
  double theta_mu = 1.5;
  /// Curvature threshold factor; the test uses kappa * max(1, ||d||).
  double kappa = 1e-8;
  InertiaMode inertia_mode = InertiaMode::inertia;
  double g_max = 100.0;
  double s_max = 100.0;
  double sigma_min = 1e-3;
  double sigma_max = 10.0;
  int max_iter = 300;
  LinearSolverKind linear_solver = LinearSolverKind::direct;
  ScMode sc_mode = ScMode::backsolve;
  int workers = 1;
  bool memory_saving = false;
  /// Fold well-scaled slacks into the inequality block.
  bool reduce_slacks = true;
  int refinement_rounds = 3;

  /// Empty when the values are usable.
  std::string check() const;
};

struct LogRow {
  int iter = 0;
  double objective = 0.0;
  double inf_pr = 0.0;
  double inf_du = 0.0;
  double mu = 0.0;
  double alpha = 0.0;
  double delta_w = 0.0;
  /// Centering parameter chosen by an adaptive strategy (NaN otherwise).
  double sigma = std::numeric_limits<double>::quiet_NaN();
  /// Golden-section steps spent choosing sigma.
  int sections = 0;
};

struct ConvergenceReport {
  SolveStatus status = SolveStatus::max_iter;
  std::string message;
  Iterate iterate;  // unscaled
  double objective = 0.0;
  double error = 0.0;  // scaled optimality error at mu = 0
  int iterations = 0;
  std::vector<LogRow> log;
  PhaseTimes times;
  int regularizations = 0;  // iterations that needed delta_w > 0
  int restorations = 0;
  bool mu_fallback = false;  // adaptive strategy fell back to monotone
  std::optional<std::uint64_t> schur_checksum;
};

ConvergenceReport solve(const NlpProblem& problem, const IpmOptions& options = {});

// ---------------------------------------------------------------------------
// Building blocks, exposed for testing.

/// Evaluation plus the assembled Jacobians.
struct PointEval {
  Evaluation ev;
  SparseMatrix j_eq, j_ineq;
};

PointEval evaluate_point(const NlpProblem& problem, const Eigen::VectorXd& x);

Residuals compute_residuals(const Iterate& it, const PointEval& pe, const Bounds& xb,
                            const Bounds& sb, double mu);

/// Average complementarity product over all finite bound sides.
double duality_measure(const Iterate& it, const Bounds& xb, const Bounds& sb);

struct ErrorScaling {
  double s1 = 1.0;
  double s2 = 1.0;
};

ErrorScaling error_scaling(const Iterate& it, const Bounds& xb, const Bounds& sb, double s_max);

/// Max of the six inf-norms, dual rows over s1 and complementarity over s2.
double optimality_error(const Residuals& r, const ErrorScaling& scaling = {});

/// The dual, primal and complementarity terms of optimality_error.
struct ErrorParts {
  double dual = 0.0, primal = 0.0, compl_ = 0.0;
};
ErrorParts optimality_error_parts(const Residuals& r, const ErrorScaling& scaling = {});

/// Largest alpha in (0,1] keeping v + alpha dv at least a (1 - tau) fraction
/// of the current distance to every finite bound.
double fraction_to_boundary(const Eigen::VectorXd& v, const Eigen::VectorXd& dv, const Bounds& b,
                            double tau);
/// Same rule for duals of the finite sides (bounded below by zero).
double fraction_to_boundary_dual(const Eigen::VectorXd& z, const Eigen::VectorXd& dz,
                                 const std::vector<char>& mask, double tau);

/// l1 norm of (c_E, c_I - s).
double theta(const Evaluation& ev, const Eigen::VectorXd& s);
/// f - mu * sum of log distances to finite bounds.
double phi(double f, const Eigen::VectorXd& x, const Eigen::VectorXd& s, const Bounds& xb,
           const Bounds& sb, double mu);

/// Pairs (theta, phi) that trial points must not be dominated by.
class Filter {
 public:
  explicit Filter(double theta_max = kInf) : theta_max_(theta_max) {}

  bool acceptable(double theta, double phi) const;
  /// Inserts the pair and drops entries it dominates.
  void add(double theta, double phi);
  void reset() { entries_.clear(); }
  double theta_max() const { return theta_max_; }
  const std::vector<std::pair<double, double>>& entries() const { return entries_; }

 private:
  double theta_max_;
  std::vector<std::pair<double, double>> entries_;
};

struct LineSearchConstants {
  double theta_min = 1e-4;
  double s_phi = 2.3;
  double s_theta = 1.1;
  double delta = 1.0;
  double eta_phi = 1e-8;
  double gamma_theta = 1e-5;
  double gamma_phi = 1e-5;
  int max_backtracks = 60;
};

/// Measures at the current point and a trial evaluator for the line search.
struct LineSearchProblem {
  double theta = 0.0;
  double phi = 0.0;
  double grad_phi_dot_d = 0.0;
  /// (theta, phi) at step alpha, or nullopt when the trial is unusable.
  std::function<std::optional<std::pair<double, double>>(double)> trial;
};

struct LineSearchResult {
  bool accepted = false;
  double alpha = 0.0;
  int trials = 0;
  bool armijo = false;  // accepted through the objective-decrease branch
  double trial_theta = 0.0, trial_phi = 0.0;
};

/// Backtracks alpha_max * 2^-i; the filter is augmented on non-Armijo
/// acceptance. accepted == false is the restoration signal.
LineSearchResult filter_line_search(const LineSearchProblem& p, Filter& filter, double alpha_max,
                                    const LineSearchConstants& c = {});

/// d^T (W + delta I) d >= kappa d^T d.
bool curvature_test(const Eigen::VectorXd& d, const Eigen::MatrixXd& w, double delta, double kappa);
/// Same test with W = blkdiag(H + Sigma_x, Sigma_s) taken from the KKT system.
bool curvature_test(const KktSystem& kkt, const Direction& d, double delta, double kappa);

double update_mu_monotone(double mu, double tol, double kappa_mu, double theta_mu);

/// (tau_affine / tau)^3.
double mehrotra_sigma(double tau_affine, double tau);
/// sigma * tau after the longest interior predictor step, clamped to
/// [mu_min, mu_max].
double update_mu_mehrotra(const Iterate& it, const Direction& affine, const Bounds& xb,
                          const Bounds& sb, double mu_min, double mu_max);

struct GoldenSectionResult {
  double sigma = 0.0;
  int sections = 0;
};

/// Minimizes q over [lo, hi] with exactly `steps` section steps and returns
/// the midpoint of the final bracket.
GoldenSectionResult golden_section(const std::function<double(double)>& q, double lo, double hi,
                                   int steps = 12);

struct QualityResult {
  double mu = 0.0;
  double sigma = 0.0;
  int sections = 0;
};

/// direction(sigma) yields the probing direction; q is the max of the scaled
/// dual, primal and complementarity measures at its fraction-to-boundary
/// trial point.
QualityResult update_mu_quality(const Iterate& it, const Residuals& residuals,
                                const std::function<Direction(double)>& direction,
                                const Bounds& xb, const Bounds& sb, const ErrorScaling& scaling,
                                double sigma_min, double sigma_max, double mu_min, double mu_max);

struct Scaling {
  double s_f = 1.0;
  Eigen::VectorXd s_g, s_h;
};

Scaling compute_scaling(const NlpProblem& problem, const Eigen::VectorXd& x0, double g_max);
/// The problem with f, c_E and c_I (and its bounds) multiplied by the scaling.
NlpProblem scaled_problem(const NlpProblem& problem, const Scaling& scaling);

/// Start point pushed inside the bounds; bound duals mu0 / distance.
Iterate initialize_iterate(const NlpProblem& problem, const IpmOptions& options);
/// Moves v at least min(k1 max(1,|bound|), k2 width) inside every finite bound.
Eigen::VectorXd push_inside(const Eigen::VectorXd& v, const Bounds& b, double k1 = 1e-2,
                            double k2 = 1e-2);

// ---------------------------------------------------------------------------
// Linear solver backends and inertia correction.

class KktBackend {
 public:
  virtual ~KktBackend() = default;
  /// Factorizes kkt.matrix and returns its inertia.
  virtual Inertia factor(const KktSystem& kkt, PhaseTimes* times) = 0;
  virtual bool singular() const = 0;
  virtual Eigen::VectorXd solve(const Eigen::VectorXd& rhs, PhaseTimes* times) const = 0;
  virtual std::optional<std::uint64_t> schur_checksum() const { return std::nullopt; }
};

/// The Schur backends label matrix rows through `map`; direct ignores it.
std::unique_ptr<KktBackend> make_backend(LinearSolverKind kind, const SchurOptions& options,
                                         const BlockMap& map);

struct RegularizationState {
  double last_delta_w = 0.0;
};

struct RegularizationConstants {
  double delta_w0 = 1e-4;
  double delta_w_min = 1e-20;
  double delta_w_max = 1e40;
  double kappa_minus = 1.0 / 3.0;
  double kappa_plus = 8.0;
  double kappa_plus_first = 100.0;
  double delta_c_bar = 1e-8;
  double kappa_c = 0.25;
};

struct CorrectionResult {
  bool ok = false;
  double delta_w = 0.0;
  double delta_c = 0.0;
  int factorizations = 0;
  Inertia inertia;
};

/// Regularizes until the factor of kkt.matrix has the target inertia.
/// kkt's regularization is updated in place.
CorrectionResult inertia_correction(KktSystem& kkt, KktBackend& backend,
                                    RegularizationState& state, double mu,
                                    PhaseTimes* times = nullptr,
                                    const RegularizationConstants& c = {});

}  // namespace arrowip
