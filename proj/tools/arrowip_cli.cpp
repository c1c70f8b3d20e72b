// arrowip command-line front end: solve and compare subcommands over the C API.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arrowip/arrowip.h"

namespace {

struct RunConfig {
  std::string case_path;
  std::string model = "opf";
  int periods = 0;
  std::map<std::string, std::string> options;
  std::string log_path, solution_path;
  bool quiet = false;
};

constexpr int kExitOptimal = 0;
constexpr int kExitSolver = 1;
constexpr int kExitInput = 2;

/// Flags that map one-to-one onto solver option keys.
const std::vector<std::pair<std::string, std::string>> kValueFlags = {
    {"--tol", "tol"},
    {"--dual-inf-tol", "dual_inf_tol"},
    {"--constr-viol-tol", "constr_viol_tol"},
    {"--compl-inf-tol", "compl_inf_tol"},
    {"--mu0", "mu0"},
    {"--mu-strategy", "mu_strategy"},
    {"--kappa-eps", "kappa_eps"},
    {"--kappa-mu", "kappa_mu"},
    {"--theta-mu", "theta_mu"},
    {"--kappa", "kappa"},
    {"--inertia-mode", "inertia_mode"},
    {"--g-max", "g_max"},
    {"--s-max", "s_max"},
    {"--sigma-min", "sigma_min"},
    {"--sigma-max", "sigma_max"},
    {"--max-iter", "max_iter"},
    {"--linear-solver", "linear_solver"},
    {"--sc-mode", "sc_mode"},
    {"--workers", "workers"},
    {"--refinement-rounds", "refinement_rounds"},
};

void add_common(CLI::App* cmd, RunConfig& cfg, std::map<std::string, std::string>& values,
                std::map<std::string, bool>& switches) {
  cmd->add_option("--case", cfg.case_path, "Case file")->required();
  cmd->add_option("--model", cfg.model, "Model")
      ->check(CLI::IsMember({"opf", "scopf", "mpopf"}));
  cmd->add_option("--periods", cfg.periods, "Periods for mpopf (default: case PERIODS)");
  for (const auto& [flag, key] : kValueFlags) {
    cmd->add_option(flag, values[key], "Solver option " + key);
  }
  cmd->add_flag("--mem-save", switches["memory_saving"], "Refactor blocks during solves");
  cmd->add_flag("--no-slack-reduction", switches["no_reduce"], "Keep every slack in the KKT system");
  cmd->add_flag("--ramp-limits", switches["ramp_limits"], "Add generator ramp rows (mpopf)");
  cmd->add_flag("-q,--quiet", cfg.quiet, "Suppress the log on standard output");
}

void collect(RunConfig& cfg, const std::map<std::string, std::string>& values,
             const std::map<std::string, bool>& switches) {
  for (const auto& [key, v] : values) {
    if (!v.empty()) cfg.options[key] = v;
  }
  if (switches.at("memory_saving")) cfg.options["memory_saving"] = "true";
  if (switches.at("no_reduce")) cfg.options["reduce_slacks"] = "false";
  if (switches.at("ramp_limits")) cfg.options["ramp_limits"] = "true";
}

aip_model model_of(const std::string& m) {
  if (m == "scopf") return AIP_MODEL_SCOPF;
  if (m == "mpopf") return AIP_MODEL_MPOPF;
  return AIP_MODEL_OPF;
}

struct Handles {
  aip_case* c = nullptr;
  aip_options* o = nullptr;
  ~Handles() {
    aip_options_free(o);
    aip_case_free(c);
  }
};

/// Loads the case and options; prints the reason and returns false on input errors.
bool prepare(const RunConfig& cfg, Handles& h) {
  if (aip_case_load(cfg.case_path.c_str(), &h.c) != AIP_OK) {
    std::cerr << "error: " << aip_last_error() << '\n';
    return false;
  }
  aip_options_create(&h.o);
  for (const auto& [key, value] : cfg.options) {
    if (aip_options_set(h.o, key.c_str(), value.c_str()) != AIP_OK) {
      std::cerr << "error: " << aip_last_error() << '\n';
      return false;
    }
  }
  return true;
}

bool write_file(const std::string& path, const char* text) {
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write '" << path << "'\n";
    return false;
  }
  out << text;
  return true;
}

int run_solve(const RunConfig& cfg) {
  Handles h;
  if (!prepare(cfg, h)) return kExitInput;
  aip_result* r = nullptr;
  if (aip_solve(h.c, model_of(cfg.model), cfg.periods, h.o, &r) != AIP_OK) {
    std::cerr << "error: " << aip_last_error() << '\n';
    return kExitInput;
  }
  if (!cfg.quiet) std::cout << aip_result_log_text(r);
  if (!cfg.log_path.empty() && !write_file(cfg.log_path, aip_result_log_text(r))) {
    aip_result_free(r);
    return kExitInput;
  }
  if (!cfg.solution_path.empty() && !write_file(cfg.solution_path, aip_result_solution_json(r))) {
    aip_result_free(r);
    return kExitInput;
  }
  const aip_solve_status status = aip_result_status(r);
  std::printf("\nstatus          %s\n", aip_solve_status_string(status));
  std::printf("objective       %.10g\n", aip_result_objective(r));
  std::printf("iterations      %d\n", aip_result_iterations(r));
  std::printf("regularizations %d\n", aip_result_regularizations(r));
  std::printf("restorations    %d\n", aip_result_restorations(r));
  std::printf("\nphase          seconds\n%s", aip_result_timing_text(r));
  if (status != AIP_SOLVE_OPTIMAL) {
    std::cerr << "solver stopped: " << aip_solve_status_string(status);
    if (*aip_result_message(r)) std::cerr << " (" << aip_result_message(r) << ")";
    std::cerr << '\n';
  }
  aip_result_free(r);
  return status == AIP_SOLVE_OPTIMAL ? kExitOptimal : kExitSolver;
}

int run_compare(const RunConfig& cfg, double tolerance) {
  Handles h;
  if (!prepare(cfg, h)) return kExitInput;
  std::vector<std::string> paths = {"direct", "schur"};
  if (cfg.model == "mpopf") paths.push_back("schur-structured");

  bool ok = true;
  std::optional<double> reference;
  std::printf("%-17s %-22s %18s %12s %5s %10s %10s %10s %10s %10s\n", "path", "status",
              "objective", "rel_delta", "iter", "init", "sc_assem", "sc_rhs", "sc_solve",
              "local");
  for (const auto& path : paths) {
    aip_options_set(h.o, "linear_solver", path.c_str());
    aip_result* r = nullptr;
    if (aip_solve(h.c, model_of(cfg.model), cfg.periods, h.o, &r) != AIP_OK) {
      std::cerr << "error: " << aip_last_error() << '\n';
      return kExitInput;
    }
    const aip_solve_status status = aip_result_status(r);
    const double obj = aip_result_objective(r);
    double delta = 0.0;
    if (status == AIP_SOLVE_OPTIMAL) {
      if (!reference) reference = obj;
      delta = std::abs(obj - *reference) / std::max(1.0, std::abs(*reference));
      if (delta > tolerance) ok = false;
    } else {
      ok = false;
    }
    aip_times t;
    aip_result_times(r, &t);
    std::printf("%-17s %-22s %18.10g %12.3e %5d %10.3f %10.3f %10.3f %10.3f %10.3f\n",
                path.c_str(), aip_solve_status_string(status), obj, delta,
                aip_result_iterations(r), t.init, t.sc_assembly, t.sc_rhs, t.sc_solve,
                t.local_solve);
    uint64_t checksum = 0;
    if (aip_result_schur_checksum(r, &checksum)) {
      std::printf("%-17s schur checksum %016llx\n", "",
                  static_cast<unsigned long long>(checksum));
    }
    aip_result_free(r);
  }
  return ok ? kExitOptimal : kExitSolver;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"arrowip: structure-exploiting interior-point solver for power flow models"};
  app.require_subcommand(1);

  RunConfig solve_cfg, compare_cfg;
  std::map<std::string, std::string> solve_values, compare_values;
  std::map<std::string, bool> solve_switches, compare_switches;
  double compare_tol = 1e-6;

  CLI::App* solve = app.add_subcommand("solve", "Solve one model");
  add_common(solve, solve_cfg, solve_values, solve_switches);
  solve->add_option("--log", solve_cfg.log_path, "Write the convergence log here");
  solve->add_option("--solution", solve_cfg.solution_path, "Write the solution JSON here");

  CLI::App* compare = app.add_subcommand("compare", "Solve with every linear-solver path");
  add_common(compare, compare_cfg, compare_values, compare_switches);
  compare->add_option("--rel-tol", compare_tol, "Allowed relative objective difference");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInput;
  }

  if (*solve) {
    collect(solve_cfg, solve_values, solve_switches);
    return run_solve(solve_cfg);
  }
  collect(compare_cfg, compare_values, compare_switches);
  return run_compare(compare_cfg, compare_tol);
}
