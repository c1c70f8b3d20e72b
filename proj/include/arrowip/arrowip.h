/* C interface of the arrowip solver library.
 *
 * Handles are opaque; every call that can fail returns an aip_status and
 * leaves a message retrievable with aip_last_error() on the calling thread.
 * Strings returned by the library stay valid until the owning handle is
 * freed.
 */
#ifndef ARROWIP_H
#define ARROWIP_H

#include <stdint.h>

#if defined(ARROWIP_BUILDING_LIBRARY)
#define ARROWIP_API __attribute__((visibility("default")))
#else
#define ARROWIP_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct aip_case aip_case;
typedef struct aip_options aip_options;
typedef struct aip_result aip_result;

typedef enum {
  AIP_OK = 0,
  AIP_ERR_INVALID_ARGUMENT = 1,
  AIP_ERR_IO = 2,
  AIP_ERR_PARSE = 3,
  AIP_ERR_MODEL = 4,
  AIP_ERR_INTERNAL = 5
} aip_status;

typedef enum { AIP_MODEL_OPF = 0, AIP_MODEL_SCOPF = 1, AIP_MODEL_MPOPF = 2 } aip_model;

typedef enum {
  AIP_SOLVE_OPTIMAL = 0,
  AIP_SOLVE_MAX_ITER = 1,
  AIP_SOLVE_RESTORATION_FAILURE = 2,
  AIP_SOLVE_LINEAR_SOLVER_FAILURE = 3
} aip_solve_status;

typedef struct {
  int iter;
  double objective;
  double inf_pr;
  double inf_du;
  double mu;
  double alpha;
  double delta_w;
  double sigma; /* NaN unless an adaptive barrier strategy chose it */
  int sections;
} aip_log_row;

typedef struct {
  double init;
  double kkt_assembly;
  double sc_assembly;
  double sc_rhs;
  double sc_solve;
  double local_solve;
  double function_eval;
} aip_times;

ARROWIP_API const char* aip_version(void);
ARROWIP_API const char* aip_last_error(void);
ARROWIP_API const char* aip_status_string(aip_status status);
ARROWIP_API const char* aip_solve_status_string(aip_solve_status status);

ARROWIP_API aip_status aip_case_load(const char* path, aip_case** out);
ARROWIP_API aip_status aip_case_parse(const char* text, aip_case** out);
ARROWIP_API void aip_case_free(aip_case* c);
ARROWIP_API int aip_case_num_buses(const aip_case* c);
ARROWIP_API int aip_case_num_branches(const aip_case* c);
ARROWIP_API int aip_case_num_generators(const aip_case* c);
ARROWIP_API int aip_case_num_storage(const aip_case* c);
ARROWIP_API int aip_case_num_contingencies(const aip_case* c);
ARROWIP_API int aip_case_num_periods(const aip_case* c);

ARROWIP_API aip_status aip_options_create(aip_options** out);
ARROWIP_API void aip_options_free(aip_options* o);
/* Keys: tol, dual_inf_tol, constr_viol_tol, compl_inf_tol, mu0, mu_strategy, kappa_eps, kappa_mu, theta_mu, kappa,
 * inertia_mode, g_max, s_max, sigma_min, sigma_max, max_iter,
 * linear_solver, sc_mode, workers, memory_saving, reduce_slacks,
 * refinement_rounds, ramp_limits. */
ARROWIP_API aip_status aip_options_set(aip_options* o, const char* key, const char* value);
ARROWIP_API aip_status aip_options_get(const aip_options* o, const char* key, char* buffer,
                                       int size);

/* periods <= 0 uses the case's PERIODS value (multiperiod model only).
 * A finished solve returns AIP_OK whatever its solve status. */
ARROWIP_API aip_status aip_solve(const aip_case* c, aip_model model, int periods,
                                 const aip_options* o, aip_result** out);
ARROWIP_API void aip_result_free(aip_result* r);
ARROWIP_API aip_solve_status aip_result_status(const aip_result* r);
ARROWIP_API const char* aip_result_message(const aip_result* r);
ARROWIP_API double aip_result_objective(const aip_result* r);
ARROWIP_API double aip_result_error(const aip_result* r);
ARROWIP_API int aip_result_iterations(const aip_result* r);
ARROWIP_API int aip_result_regularizations(const aip_result* r);
ARROWIP_API int aip_result_restorations(const aip_result* r);
ARROWIP_API int aip_result_mu_fallback(const aip_result* r);
ARROWIP_API int aip_result_log_rows(const aip_result* r);
ARROWIP_API aip_status aip_result_log_row(const aip_result* r, int i, aip_log_row* out);
ARROWIP_API aip_status aip_result_times(const aip_result* r, aip_times* out);
/* Returns 1 and writes the checksum when a Schur backend ran. */
ARROWIP_API int aip_result_schur_checksum(const aip_result* r, uint64_t* out);
ARROWIP_API int aip_result_num_variables(const aip_result* r);
/* Copies min(size, n_x) primal values. */
ARROWIP_API aip_status aip_result_x(const aip_result* r, double* buffer, int size);
ARROWIP_API const char* aip_result_log_text(const aip_result* r);
ARROWIP_API const char* aip_result_timing_text(const aip_result* r);
ARROWIP_API const char* aip_result_solution_json(const aip_result* r);

#ifdef __cplusplus
}
#endif

#endif /* ARROWIP_H */
