#include "arrowip/arrowip.h"

#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "arrowip/grid.hpp"
#include "arrowip/ipm.hpp"
#include "arrowip/report.hpp"

struct aip_case {
  arrowip::grid::GridCase data;
};

struct aip_options {
  arrowip::IpmOptions ipm;
  bool ramp_limits = false;
};

struct aip_result {
  arrowip::ConvergenceReport report;
  std::string log_text, timing_text, solution;
};

namespace {

thread_local std::string last_error;

aip_status fail(aip_status s, const std::string& msg) {
  last_error = msg;
  return s;
}

bool parse_double(const char* v, double& out) {
  const char* end = v + std::strlen(v);
  auto [p, ec] = std::from_chars(v, end, out);
  return ec == std::errc() && p == end;
}

bool parse_int(const char* v, int& out) {
  const char* end = v + std::strlen(v);
  auto [p, ec] = std::from_chars(v, end, out);
  return ec == std::errc() && p == end;
}

bool parse_bool(const char* v, bool& out) {
  const std::string s = v;
  if (s == "1" || s == "true" || s == "on") {
    out = true;
    return true;
  }
  if (s == "0" || s == "false" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

std::string number_text(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Reads or writes one option; value == nullptr reads into text.
aip_status access(aip_options* o, const std::string& key, const char* value, std::string* text) {
  using namespace arrowip;
  IpmOptions& p = o->ipm;
  const std::pair<const char*, double*> doubles[] = {
      {"tol", &p.tol},           {"mu0", &p.mu0},         {"kappa_eps", &p.kappa_eps},
      {"kappa_mu", &p.kappa_mu}, {"theta_mu", &p.theta_mu}, {"kappa", &p.kappa},
      {"g_max", &p.g_max},       {"s_max", &p.s_max},     {"sigma_min", &p.sigma_min},
      {"sigma_max", &p.sigma_max}, {"dual_inf_tol", &p.dual_inf_tol},
      {"constr_viol_tol", &p.constr_viol_tol}, {"compl_inf_tol", &p.compl_inf_tol}};
  for (const auto& [name, field] : doubles) {
    if (key != name) continue;
    if (!value) {
      *text = number_text(*field);
      return AIP_OK;
    }
    if (!parse_double(value, *field)) return fail(AIP_ERR_INVALID_ARGUMENT, key + ": not a number");
    return AIP_OK;
  }
  const std::pair<const char*, int*> ints[] = {{"max_iter", &p.max_iter},
                                               {"workers", &p.workers},
                                               {"refinement_rounds", &p.refinement_rounds}};
  for (const auto& [name, field] : ints) {
    if (key != name) continue;
    if (!value) {
      *text = std::to_string(*field);
      return AIP_OK;
    }
    if (!parse_int(value, *field)) return fail(AIP_ERR_INVALID_ARGUMENT, key + ": not an integer");
    return AIP_OK;
  }
  const std::pair<const char*, bool*> bools[] = {{"memory_saving", &p.memory_saving},
                                                 {"reduce_slacks", &p.reduce_slacks},
                                                 {"ramp_limits", &o->ramp_limits}};
  for (const auto& [name, field] : bools) {
    if (key != name) continue;
    if (!value) {
      *text = *field ? "true" : "false";
      return AIP_OK;
    }
    if (!parse_bool(value, *field)) return fail(AIP_ERR_INVALID_ARGUMENT, key + ": not a boolean");
    return AIP_OK;
  }
  auto choice = [&](auto& field, auto parse) -> aip_status {
    if (!value) {
      *text = to_string(field);
      return AIP_OK;
    }
    const auto parsed = parse(std::string(value));
    if (!parsed) return fail(AIP_ERR_INVALID_ARGUMENT, key + ": unknown value '" + value + "'");
    field = *parsed;
    return AIP_OK;
  };
  if (key == "mu_strategy") return choice(p.mu_strategy, parse_mu_strategy);
  if (key == "inertia_mode") return choice(p.inertia_mode, parse_inertia_mode);
  if (key == "linear_solver") return choice(p.linear_solver, parse_linear_solver);
  if (key == "sc_mode") return choice(p.sc_mode, parse_sc_mode);
  return fail(AIP_ERR_INVALID_ARGUMENT, "unknown option '" + key + "'");
}

}  // namespace

extern "C" {

const char* aip_version(void) { return "0.1.0"; }

const char* aip_last_error(void) { return last_error.c_str(); }

const char* aip_status_string(aip_status status) {
  switch (status) {
    case AIP_OK:
      return "ok";
    case AIP_ERR_INVALID_ARGUMENT:
      return "invalid argument";
    case AIP_ERR_IO:
      return "i/o error";
    case AIP_ERR_PARSE:
      return "parse error";
    case AIP_ERR_MODEL:
      return "model error";
    case AIP_ERR_INTERNAL:
      return "internal error";
  }
  return "unknown status";
}

const char* aip_solve_status_string(aip_solve_status status) {
  switch (status) {
    case AIP_SOLVE_OPTIMAL:
      return "optimal";
    case AIP_SOLVE_MAX_ITER:
      return "max-iter";
    case AIP_SOLVE_RESTORATION_FAILURE:
      return "restoration-failure";
    case AIP_SOLVE_LINEAR_SOLVER_FAILURE:
      return "linear-solver-failure";
  }
  return "unknown";
}

aip_status aip_case_parse(const char* text, aip_case** out) {
  if (!text || !out) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  try {
    auto c = std::make_unique<aip_case>();
    c->data = arrowip::grid::parse_case(text);
    *out = c.release();
    return AIP_OK;
  } catch (const arrowip::grid::CaseError& e) {
    return fail(AIP_ERR_PARSE, e.what());
  } catch (const arrowip::grid::ConnectivityError& e) {
    return fail(AIP_ERR_PARSE, e.what());
  } catch (const std::exception& e) {
    return fail(AIP_ERR_INTERNAL, e.what());
  }
}

aip_status aip_case_load(const char* path, aip_case** out) {
  if (!path || !out) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  std::ifstream in(path);
  if (!in) return fail(AIP_ERR_IO, std::string("cannot open case file '") + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  const aip_status s = aip_case_parse(os.str().c_str(), out);
  if (s != AIP_OK) last_error = std::string(path) + ": " + last_error;
  return s;
}

void aip_case_free(aip_case* c) { delete c; }

int aip_case_num_buses(const aip_case* c) { return c ? static_cast<int>(c->data.buses.size()) : 0; }
int aip_case_num_branches(const aip_case* c) {
  return c ? static_cast<int>(c->data.branches.size()) : 0;
}
int aip_case_num_generators(const aip_case* c) {
  return c ? static_cast<int>(c->data.generators.size()) : 0;
}
int aip_case_num_storage(const aip_case* c) {
  return c ? static_cast<int>(c->data.storage.size()) : 0;
}
int aip_case_num_contingencies(const aip_case* c) {
  return c ? static_cast<int>(c->data.contingencies.size()) : 0;
}
int aip_case_num_periods(const aip_case* c) { return c ? c->data.periods : 0; }

aip_status aip_options_create(aip_options** out) {
  if (!out) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  *out = new aip_options();
  return AIP_OK;
}

void aip_options_free(aip_options* o) { delete o; }

aip_status aip_options_set(aip_options* o, const char* key, const char* value) {
  if (!o || !key || !value) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  return access(o, key, value, nullptr);
}

aip_status aip_options_get(const aip_options* o, const char* key, char* buffer, int size) {
  if (!o || !key || !buffer || size <= 0) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  std::string text;
  const aip_status s = access(const_cast<aip_options*>(o), key, nullptr, &text);
  if (s != AIP_OK) return s;
  if (static_cast<int>(text.size()) >= size) return fail(AIP_ERR_INVALID_ARGUMENT, "buffer too small");
  std::memcpy(buffer, text.c_str(), text.size() + 1);
  return AIP_OK;
}

aip_status aip_solve(const aip_case* c, aip_model model, int periods, const aip_options* o,
                     aip_result** out) {
  using namespace arrowip;
  if (!c || !out) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  const aip_options defaults;
  const aip_options& opt = o ? *o : defaults;
  if (const std::string m = opt.ipm.check(); !m.empty()) return fail(AIP_ERR_INVALID_ARGUMENT, m);

  grid::GridModel built;
  try {
    switch (model) {
      case AIP_MODEL_OPF:
        built = grid::build_opf(c->data);
        break;
      case AIP_MODEL_SCOPF:
        built = grid::build_scopf(c->data, c->data.contingencies);
        break;
      case AIP_MODEL_MPOPF: {
        grid::MpopfOptions mo;
        mo.ramp_limits = opt.ramp_limits;
        built = grid::build_mpopf(c->data, periods > 0 ? periods : c->data.periods, mo);
        break;
      }
      default:
        return fail(AIP_ERR_INVALID_ARGUMENT, "unknown model");
    }
  } catch (const std::exception& e) {
    return fail(AIP_ERR_MODEL, e.what());
  }

  try {
    auto r = std::make_unique<aip_result>();
    r->report = solve(built.problem, opt.ipm);
    std::ostringstream log, timing;
    write_log(log, r->report);
    write_timings(timing, r->report.times);
    r->log_text = log.str();
    r->timing_text = timing.str();
    const grid::GridSolution sol =
        grid::extract_solution(built, c->data, r->report.iterate.x, r->report.objective);
    r->solution = solution_json(sol, c->data, r->report);
    *out = r.release();
    return AIP_OK;
  } catch (const std::invalid_argument& e) {
    return fail(AIP_ERR_MODEL, e.what());
  } catch (const std::exception& e) {
    return fail(AIP_ERR_INTERNAL, e.what());
  }
}

void aip_result_free(aip_result* r) { delete r; }

aip_solve_status aip_result_status(const aip_result* r) {
  switch (r->report.status) {
    case arrowip::SolveStatus::optimal:
      return AIP_SOLVE_OPTIMAL;
    case arrowip::SolveStatus::max_iter:
      return AIP_SOLVE_MAX_ITER;
    case arrowip::SolveStatus::restoration_failure:
      return AIP_SOLVE_RESTORATION_FAILURE;
    case arrowip::SolveStatus::linear_solver_failure:
      return AIP_SOLVE_LINEAR_SOLVER_FAILURE;
  }
  return AIP_SOLVE_LINEAR_SOLVER_FAILURE;
}

const char* aip_result_message(const aip_result* r) { return r->report.message.c_str(); }
double aip_result_objective(const aip_result* r) { return r->report.objective; }
double aip_result_error(const aip_result* r) { return r->report.error; }
int aip_result_iterations(const aip_result* r) { return r->report.iterations; }
int aip_result_regularizations(const aip_result* r) { return r->report.regularizations; }
int aip_result_restorations(const aip_result* r) { return r->report.restorations; }
int aip_result_mu_fallback(const aip_result* r) { return r->report.mu_fallback ? 1 : 0; }
int aip_result_log_rows(const aip_result* r) { return static_cast<int>(r->report.log.size()); }

aip_status aip_result_log_row(const aip_result* r, int i, aip_log_row* out) {
  if (!r || !out) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  if (i < 0 || i >= static_cast<int>(r->report.log.size())) {
    return fail(AIP_ERR_INVALID_ARGUMENT, "log row out of range");
  }
  const arrowip::LogRow& row = r->report.log[i];
  *out = {row.iter, row.objective, row.inf_pr, row.inf_du, row.mu,
          row.alpha, row.delta_w, row.sigma, row.sections};
  return AIP_OK;
}

aip_status aip_result_times(const aip_result* r, aip_times* out) {
  if (!r || !out) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  const arrowip::PhaseTimes& t = r->report.times;
  *out = {t.init, t.kkt_assembly, t.sc_assembly, t.sc_rhs, t.sc_solve, t.local_solve,
          t.function_eval};
  return AIP_OK;
}

int aip_result_schur_checksum(const aip_result* r, uint64_t* out) {
  if (!r || !r->report.schur_checksum) return 0;
  if (out) *out = *r->report.schur_checksum;
  return 1;
}

int aip_result_num_variables(const aip_result* r) {
  return static_cast<int>(r->report.iterate.x.size());
}

aip_status aip_result_x(const aip_result* r, double* buffer, int size) {
  if (!r || !buffer) return fail(AIP_ERR_INVALID_ARGUMENT, "null argument");
  const auto& x = r->report.iterate.x;
  const int n = std::min(size, static_cast<int>(x.size()));
  for (int i = 0; i < n; ++i) buffer[i] = x[i];
  return AIP_OK;
}

const char* aip_result_log_text(const aip_result* r) { return r->log_text.c_str(); }
const char* aip_result_timing_text(const aip_result* r) { return r->timing_text.c_str(); }
const char* aip_result_solution_json(const aip_result* r) { return r->solution.c_str(); }

}  // extern "C"
