#ifndef CQR_CQR_H
#define CQR_CQR_H

/* C interface to the quantile regression solvers.
 *
 * Handles are opaque and owned by the caller; release them with the matching
 * *_free function. Every function returning cqr_status leaves a message in
 * cqr_last_error() on failure. Strings returned through char** are released
 * with cqr_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(CQR_BUILDING)
#define CQR_API __attribute__((visibility("default")))
#else
#define CQR_API
#endif

typedef enum {
  CQR_OK = 0,
  CQR_ERR_DOMAIN = 1,
  CQR_ERR_CONFIG = 2,
  CQR_ERR_NUMERICAL = 3,
  CQR_ERR_PARSE = 4,
  CQR_ERR_CONVERGENCE = 5,
  CQR_ERR_IO = 6,
  CQR_ERR_INTERNAL = 7
} cqr_status;

typedef enum { CQR_ADMM = 0, CQR_MM = 1, CQR_CD = 2, CQR_IP = 3 } cqr_algorithm;

typedef struct cqr_dataset cqr_dataset;
typedef struct cqr_result cqr_result;
typedef struct cqr_report cqr_report;

typedef struct {
  cqr_algorithm algorithm;
  int max_iter;
  double tol;
  double rho;
  double eps_mm;
  double eps_abs;
  double eps_rel;
  double selection_threshold;
} cqr_options;

/* Thread-local message for the most recent failure on this thread. */
CQR_API const char* cqr_last_error(void);
CQR_API const char* cqr_status_name(cqr_status status);

CQR_API void cqr_options_default(cqr_options* out);
/* "admm", "mm", "cd" or "ip", case-insensitive. */
CQR_API cqr_status cqr_parse_algorithm(const char* name, cqr_algorithm* out);
CQR_API const char* cqr_algorithm_name(cqr_algorithm algorithm);

/* x is n-by-p, row-major. */
CQR_API cqr_status cqr_dataset_create(const double* x, const double* y, size_t n, size_t p,
                                      cqr_dataset** out);
/* response_name may be NULL, in which case response_index is used. */
CQR_API cqr_status cqr_dataset_read_csv(const char* path, const char* response_name,
                                        size_t response_index, cqr_dataset** out);
CQR_API size_t cqr_dataset_n(const cqr_dataset* data);
CQR_API size_t cqr_dataset_p(const cqr_dataset* data);
CQR_API void cqr_dataset_free(cqr_dataset* data);

/* Fits at the k levels in taus. options may be NULL for defaults. A failed
 * pilot stage returns CQR_ERR_CONVERGENCE and no result. A result whose
 * solver hit max_iter is returned with CQR_OK and converged == 0. */
CQR_API cqr_status cqr_fit(const cqr_dataset* data, const double* taus, size_t k,
                           int regularized, double lambda, const cqr_options* options,
                           cqr_result** out);
CQR_API size_t cqr_result_num_intercepts(const cqr_result* result);
CQR_API size_t cqr_result_num_coefficients(const cqr_result* result);
/* Copy up to len values; return the number available. */
CQR_API size_t cqr_result_intercepts(const cqr_result* result, double* buf, size_t len);
CQR_API size_t cqr_result_coefficients(const cqr_result* result, double* buf, size_t len);
CQR_API int cqr_result_converged(const cqr_result* result);
CQR_API int cqr_result_iterations(const cqr_result* result);
CQR_API double cqr_result_objective(const cqr_result* result);
CQR_API cqr_status cqr_result_to_json(const cqr_result* result, char** out);
CQR_API cqr_status cqr_result_to_csv(const cqr_result* result, char** out);
CQR_API void cqr_result_free(cqr_result* result);

typedef struct {
  const char* preset; /* qr-noreg, cqr-noreg, qr-reg, cqr-reg */
  size_t n;
  size_t p;
  int support;        /* < 0 keeps the preset default */
  int reps;           /* <= 0 keeps the preset default */
  uint64_t seed;
  int has_lambda;     /* 0: sqrt(n log p) / 4 */
  double lambda;
  const cqr_algorithm* algorithms;
  size_t num_algorithms;
  const cqr_options* options; /* may be NULL */
} cqr_sim_config;

CQR_API cqr_status cqr_simulate(const cqr_sim_config* config, cqr_report** out);
CQR_API size_t cqr_report_num_rows(const cqr_report* report);
/* Number of rows with more than 20% failed replications. */
CQR_API size_t cqr_report_num_flagged(const cqr_report* report);
CQR_API cqr_status cqr_report_to_json(const cqr_report* report, char** out);
CQR_API cqr_status cqr_report_to_csv(const cqr_report* report, char** out);
CQR_API void cqr_report_free(cqr_report* report);

CQR_API void cqr_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
