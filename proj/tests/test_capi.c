/* Exercises the shared library through its C header only. */

#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "cqr/cqr.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                     \
    }                                                                 \
  } while (0)

static cqr_dataset* small_dataset(void) {
  /* y = 1 + 2 x1 - x2 on six rows plus one outlier */
  const double x[] = {0, 0, 1, 0, 0, 1, 1, 1, 2, 0, 0, 2, 2, 1};
  const double y[] = {1, 3, 0, 2, 5, -1, 9};
  cqr_dataset* d = NULL;
  EXPECT(cqr_dataset_create(x, y, 7, 2, &d) == CQR_OK);
  return d;
}

static void test_options_and_names(void) {
  cqr_options o;
  cqr_algorithm a;
  cqr_options_default(&o);
  EXPECT(o.algorithm == CQR_ADMM);
  EXPECT(o.max_iter == 5000);
  EXPECT(fabs(o.rho - 1.2) < 1e-15);
  EXPECT(fabs(o.eps_abs - 1e-2) < 1e-15);
  EXPECT(cqr_parse_algorithm("Ip", &a) == CQR_OK && a == CQR_IP);
  EXPECT(cqr_parse_algorithm("simplex", &a) == CQR_ERR_CONFIG);
  EXPECT(strstr(cqr_last_error(), "simplex") != NULL);
  EXPECT(strcmp(cqr_algorithm_name(CQR_CD), "cd") == 0);
  EXPECT(strcmp(cqr_status_name(CQR_ERR_PARSE), "parse") == 0);
}

static void test_dataset(void) {
  cqr_dataset* d = small_dataset();
  const double bad_x[] = {1, NAN};
  const double y[] = {1, 2};
  cqr_dataset* e = NULL;
  EXPECT(cqr_dataset_n(d) == 7);
  EXPECT(cqr_dataset_p(d) == 2);
  EXPECT(cqr_dataset_create(bad_x, y, 2, 1, &e) == CQR_ERR_DOMAIN);
  EXPECT(e == NULL);
  EXPECT(cqr_dataset_create(bad_x, NULL, 2, 1, &e) == CQR_ERR_CONFIG);
  EXPECT(cqr_dataset_read_csv("/nonexistent.csv", "y", 0, &e) == CQR_ERR_IO);
  cqr_dataset_free(d);
  cqr_dataset_free(NULL);
}

static void test_csv_dataset(void) {
  const char* path = "capi_test_input.csv";
  FILE* f = fopen(path, "w");
  cqr_dataset* d = NULL;
  fputs("a,y,b\n1,2,3\n4,5,6\n7,8,9\n", f);
  fclose(f);
  EXPECT(cqr_dataset_read_csv(path, "y", 0, &d) == CQR_OK);
  EXPECT(cqr_dataset_p(d) == 2);
  cqr_dataset_free(d);
  EXPECT(cqr_dataset_read_csv(path, NULL, 2, &d) == CQR_OK);
  cqr_dataset_free(d);
  EXPECT(cqr_dataset_read_csv(path, "z", 0, &d) == CQR_ERR_PARSE);
  f = fopen(path, "w");
  fputs("y,a\n1,\n", f);
  fclose(f);
  EXPECT(cqr_dataset_read_csv(path, "y", 0, &d) == CQR_ERR_PARSE);
  EXPECT(strstr(cqr_last_error(), "line 2") != NULL);
  remove(path);
}

static void test_fit(void) {
  cqr_dataset* d = small_dataset();
  cqr_options o;
  cqr_result* r = NULL;
  const double tau[] = {0.5};
  const double taus[] = {0.2, 0.5, 0.8};
  double coef[2], icpt[3];
  char* json = NULL;
  char* csv = NULL;

  cqr_options_default(&o);
  o.algorithm = CQR_IP;
  EXPECT(cqr_fit(d, tau, 1, 0, 0.0, &o, &r) == CQR_OK);
  EXPECT(cqr_result_converged(r) == 1);
  EXPECT(cqr_result_num_intercepts(r) == 1);
  EXPECT(cqr_result_coefficients(r, coef, 2) == 2);
  EXPECT(cqr_result_intercepts(r, icpt, 3) == 1);
  EXPECT(fabs(coef[0] - 2.0) < 1e-6);
  EXPECT(fabs(coef[1] + 1.0) < 1e-6);
  EXPECT(fabs(icpt[0] - 1.0) < 1e-6);
  EXPECT(cqr_result_objective(r) > 0.0);
  EXPECT(cqr_result_to_json(r, &json) == CQR_OK);
  EXPECT(strstr(json, "\"schema_version\": \"1.0\"") != NULL);
  EXPECT(cqr_result_to_csv(r, &csv) == CQR_OK);
  EXPECT(strncmp(csv, "name,value\n", 11) == 0);
  cqr_string_free(json);
  cqr_string_free(csv);
  cqr_result_free(r);

  o.algorithm = CQR_CD;
  EXPECT(cqr_fit(d, taus, 3, 0, 0.0, &o, &r) == CQR_OK);
  EXPECT(cqr_result_num_intercepts(r) == 3);
  EXPECT(cqr_result_num_coefficients(r) == 2);
  cqr_result_free(r);

  /* defaults when options is NULL, regularized through the pipeline */
  EXPECT(cqr_fit(d, tau, 1, 1, 0.5, NULL, &r) == CQR_OK);
  EXPECT(cqr_result_to_json(r, &json) == CQR_OK);
  EXPECT(strstr(json, "\"pilot\"") != NULL);
  cqr_string_free(json);
  cqr_result_free(r);

  /* an unconverged fit is still a result */
  o.algorithm = CQR_ADMM;
  o.max_iter = 1;
  EXPECT(cqr_fit(d, tau, 1, 0, 0.0, &o, &r) == CQR_OK);
  EXPECT(cqr_result_converged(r) == 0);
  cqr_result_free(r);

  /* a failed pilot is not */
  r = NULL;
  EXPECT(cqr_fit(d, tau, 1, 1, 0.5, &o, &r) == CQR_ERR_CONVERGENCE);
  EXPECT(r == NULL);
  EXPECT(strstr(cqr_last_error(), "pilot") != NULL);

  {
    const double bad_tau[] = {1.5};
    const double unsorted[] = {0.5, 0.2};
    EXPECT(cqr_fit(d, bad_tau, 1, 0, 0.0, NULL, &r) != CQR_OK);
    EXPECT(cqr_fit(d, unsorted, 2, 0, 0.0, NULL, &r) != CQR_OK);
    EXPECT(cqr_fit(d, tau, 1, 1, -1.0, NULL, &r) == CQR_ERR_CONFIG);
    EXPECT(cqr_fit(NULL, tau, 1, 0, 0.0, NULL, &r) == CQR_ERR_CONFIG);
    EXPECT(cqr_fit(d, tau, 1, 0, 0.0, NULL, NULL) == CQR_ERR_CONFIG);
  }
  cqr_dataset_free(d);
}

static void test_simulate(void) {
  cqr_sim_config c;
  cqr_report* r = NULL;
  char* csv = NULL;
  char* json = NULL;
  const cqr_algorithm algs[] = {CQR_ADMM, CQR_CD};
  memset(&c, 0, sizeof c);
  c.preset = "qr-noreg";
  c.n = 60;
  c.p = 3;
  c.support = -1;
  c.reps = 2;
  c.seed = 4;
  c.algorithms = algs;
  c.num_algorithms = 2;
  EXPECT(cqr_simulate(&c, &r) == CQR_OK);
  EXPECT(cqr_report_num_rows(r) == 2);
  EXPECT(cqr_report_num_flagged(r) == 0);
  EXPECT(cqr_report_to_csv(r, &csv) == CQR_OK);
  EXPECT(strstr(csv, "n,p,algorithm,mean_error,mean_N_T,mean_N_F,mean_seconds,reps\n60,3,admm,") != NULL);
  EXPECT(cqr_report_to_json(r, &json) == CQR_OK);
  EXPECT(strstr(json, "\"preset\": \"qr-noreg\"") != NULL);
  cqr_string_free(csv);
  cqr_string_free(json);
  cqr_report_free(r);

  c.preset = "nope";
  EXPECT(cqr_simulate(&c, &r) == CQR_ERR_CONFIG);
  c.preset = "qr-reg";
  c.has_lambda = 1;
  c.lambda = -2.0;
  EXPECT(cqr_simulate(&c, &r) == CQR_ERR_CONFIG);
}

int main(void) {
  test_options_and_names();
  test_dataset();
  test_csv_dataset();
  test_fit();
  test_simulate();
  if (failures) {
    fprintf(stderr, "%d check(s) failed\n", failures);
    return 1;
  }
  printf("all C interface checks passed\n");
  return 0;
}
