#include "cqr/cqr.h"

#include <cstring>
#include <new>
#include <string>

#include "cqr/io.hpp"
#include "cqr/pipeline.hpp"
#include "cqr/simlab.hpp"

struct cqr_dataset {
  cqr::Dataset data;
  std::vector<std::string> covariates;
};

struct cqr_result {
  cqr::FitResult fit;
  cqr::io::ResultDocument doc;
};

struct cqr_report {
  cqr::SimReport report;
};

namespace {

thread_local std::string last_error;

cqr_status status_of(cqr::ErrorKind kind) {
  switch (kind) {
    case cqr::ErrorKind::Domain: return CQR_ERR_DOMAIN;
    case cqr::ErrorKind::Config: return CQR_ERR_CONFIG;
    case cqr::ErrorKind::Numerical: return CQR_ERR_NUMERICAL;
    case cqr::ErrorKind::Parse: return CQR_ERR_PARSE;
    case cqr::ErrorKind::Convergence: return CQR_ERR_CONVERGENCE;
    case cqr::ErrorKind::Io: return CQR_ERR_IO;
  }
  return CQR_ERR_INTERNAL;
}

cqr_status set_error(cqr_status status, std::string message) {
  last_error = std::move(message);
  return status;
}

// Runs body, translating exceptions into status codes.
template <class F>
cqr_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return CQR_OK;
  } catch (const cqr::Error& e) {
    return set_error(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return set_error(CQR_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(CQR_ERR_INTERNAL, e.what());
  }
}

cqr::Algorithm to_cpp(cqr_algorithm a) {
  switch (a) {
    case CQR_ADMM: return cqr::Algorithm::Admm;
    case CQR_MM: return cqr::Algorithm::Mm;
    case CQR_CD: return cqr::Algorithm::Cd;
    case CQR_IP: return cqr::Algorithm::Ip;
  }
  cqr::fail(cqr::ErrorKind::Config, "unknown algorithm code " + std::to_string(static_cast<int>(a)));
}

cqr::SolverOptions to_cpp(const cqr_options* o) {
  cqr::SolverOptions s;
  if (!o) return s;
  s.algorithm = to_cpp(o->algorithm);
  s.max_iter = o->max_iter;
  s.tol = o->tol;
  s.rho = o->rho;
  s.eps_mm = o->eps_mm;
  s.eps_abs = o->eps_abs;
  s.eps_rel = o->eps_rel;
  s.selection_threshold = o->selection_threshold;
  return s;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) cqr::fail(cqr::ErrorKind::Config, std::string(what) + " must not be NULL");
}

size_t copy_vector(const cqr::VectorXd& v, double* buf, size_t len) {
  const auto n = static_cast<size_t>(v.size());
  if (buf)
    for (size_t i = 0; i < n && i < len; ++i) buf[i] = v[static_cast<cqr::Index>(i)];
  return n;
}

}  // namespace

extern "C" {

const char* cqr_last_error(void) { return last_error.c_str(); }

const char* cqr_status_name(cqr_status status) {
  switch (status) {
    case CQR_OK: return "ok";
    case CQR_ERR_DOMAIN: return "domain";
    case CQR_ERR_CONFIG: return "config";
    case CQR_ERR_NUMERICAL: return "numerical";
    case CQR_ERR_PARSE: return "parse";
    case CQR_ERR_CONVERGENCE: return "convergence";
    case CQR_ERR_IO: return "io";
    case CQR_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void cqr_options_default(cqr_options* out) {
  if (!out) return;
  const cqr::SolverOptions d;
  out->algorithm = CQR_ADMM;
  out->max_iter = d.max_iter;
  out->tol = d.tol;
  out->rho = d.rho;
  out->eps_mm = d.eps_mm;
  out->eps_abs = d.eps_abs;
  out->eps_rel = d.eps_rel;
  out->selection_threshold = d.selection_threshold;
}

cqr_status cqr_parse_algorithm(const char* name, cqr_algorithm* out) {
  return guarded([&] {
    require(name, "name");
    require(out, "out");
    *out = static_cast<cqr_algorithm>(static_cast<int>(cqr::parse_algorithm(name)));
  });
}

const char* cqr_algorithm_name(cqr_algorithm algorithm) {
  switch (algorithm) {
    case CQR_ADMM: return "admm";
    case CQR_MM: return "mm";
    case CQR_CD: return "cd";
    case CQR_IP: return "ip";
  }
  return "unknown";
}

cqr_status cqr_dataset_create(const double* x, const double* y, size_t n, size_t p,
                              cqr_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(y, "y");
    if (p > 0) require(x, "x");
    const auto rows = static_cast<cqr::Index>(n);
    const auto cols = static_cast<cqr::Index>(p);
    cqr::MatrixXd xm(rows, cols);
    for (cqr::Index i = 0; i < rows; ++i)
      for (cqr::Index j = 0; j < cols; ++j) xm(i, j) = x[i * cols + j];
    const cqr::VectorXd yv = Eigen::Map<const cqr::VectorXd>(y, rows);
    *out = new cqr_dataset{cqr::Dataset(std::move(xm), yv), {}};
  });
}

cqr_status cqr_dataset_read_csv(const char* path, const char* response_name,
                                size_t response_index, cqr_dataset** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(path, "path");
    const cqr::io::ColumnRef ref = response_name
                                       ? cqr::io::ColumnRef(std::string(response_name))
                                       : cqr::io::ColumnRef(static_cast<cqr::Index>(response_index));
    cqr::io::Table t = cqr::io::read_csv(path, ref);
    *out = new cqr_dataset{std::move(t.data), std::move(t.covariates)};
  });
}

size_t cqr_dataset_n(const cqr_dataset* data) {
  return data ? static_cast<size_t>(data->data.n()) : 0;
}

size_t cqr_dataset_p(const cqr_dataset* data) {
  return data ? static_cast<size_t>(data->data.p()) : 0;
}

void cqr_dataset_free(cqr_dataset* data) { delete data; }

cqr_status cqr_fit(const cqr_dataset* data, const double* taus, size_t k, int regularized,
                   double lambda, const cqr_options* options, cqr_result** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(data, "data");
    if (k > 0) require(taus, "taus");
    cqr::FitRequest req{data->data, cqr::QuantileLevels(std::vector<double>(taus, taus + k)),
                        regularized != 0, lambda, to_cpp(options), {}};
    cqr::FitResult fit = cqr::fit(req);
    auto doc = cqr::io::ResultDocument::from(req, fit);
    doc.covariates = data->covariates;
    *out = new cqr_result{std::move(fit), std::move(doc)};
  });
}

size_t cqr_result_num_intercepts(const cqr_result* r) {
  return r ? static_cast<size_t>(r->fit.intercepts.size()) : 0;
}

size_t cqr_result_num_coefficients(const cqr_result* r) {
  return r ? static_cast<size_t>(r->fit.coefficients.size()) : 0;
}

size_t cqr_result_intercepts(const cqr_result* r, double* buf, size_t len) {
  return r ? copy_vector(r->fit.intercepts, buf, len) : 0;
}

size_t cqr_result_coefficients(const cqr_result* r, double* buf, size_t len) {
  return r ? copy_vector(r->fit.coefficients, buf, len) : 0;
}

int cqr_result_converged(const cqr_result* r) { return r && r->fit.converged ? 1 : 0; }

int cqr_result_iterations(const cqr_result* r) { return r ? r->fit.iterations : 0; }

double cqr_result_objective(const cqr_result* r) { return r ? r->fit.objective : 0.0; }

cqr_status cqr_result_to_json(const cqr_result* r, char** out) {
  return guarded([&] {
    require(r, "result");
    require(out, "out");
    *out = copy_string(cqr::io::to_json(r->doc));
  });
}

cqr_status cqr_result_to_csv(const cqr_result* r, char** out) {
  return guarded([&] {
    require(r, "result");
    require(out, "out");
    *out = copy_string(cqr::io::to_csv(r->doc));
  });
}

void cqr_result_free(cqr_result* r) { delete r; }

cqr_status cqr_simulate(const cqr_sim_config* config, cqr_report** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    require(config, "config");
    require(config->preset, "preset");
    cqr::SimConfig c = cqr::preset_config(config->preset, static_cast<cqr::Index>(config->n),
                                          static_cast<cqr::Index>(config->p));
    if (config->support >= 0) c.true_support_size = config->support;
    if (config->reps > 0) c.reps = config->reps;
    c.base_seed = config->seed;
    if (config->has_lambda) c.lambda = config->lambda;
    if (config->options) c.options = to_cpp(config->options);
    c.selection_threshold = c.options.selection_threshold;
    if (config->num_algorithms > 0) {
      require(config->algorithms, "algorithms");
      c.algorithms.clear();
      for (size_t i = 0; i < config->num_algorithms; ++i)
        c.algorithms.push_back(to_cpp(config->algorithms[i]));
    }
    *out = new cqr_report{cqr::run_experiment(c)};
  });
}

size_t cqr_report_num_rows(const cqr_report* r) { return r ? r->report.rows.size() : 0; }

size_t cqr_report_num_flagged(const cqr_report* r) {
  if (!r) return 0;
  size_t n = 0;
  for (const auto& row : r->report.rows) n += row.flagged ? 1 : 0;
  return n;
}

cqr_status cqr_report_to_json(const cqr_report* r, char** out) {
  return guarded([&] {
    require(r, "report");
    require(out, "out");
    *out = copy_string(cqr::io::to_json(r->report));
  });
}

cqr_status cqr_report_to_csv(const cqr_report* r, char** out) {
  return guarded([&] {
    require(r, "report");
    require(out, "out");
    *out = copy_string(cqr::io::to_csv(r->report));
  });
}

void cqr_report_free(cqr_report* r) { delete r; }

void cqr_string_free(char* s) { std::free(s); }

}  // extern "C"
