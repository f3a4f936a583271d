// Command-line front end. Talks to the solvers only through the C interface.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cqr/cqr.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitUsage = 64;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  return out;
}

// Owns a string returned by the library.
struct LibString {
  char* p = nullptr;
  ~LibString() { cqr_string_free(p); }
};

int report_error(const char* stage, cqr_status status) {
  std::cerr << "cqr: " << stage << " failed (" << cqr_status_name(status)
            << "): " << cqr_last_error() << "\n";
  return status == CQR_ERR_CONVERGENCE ? kExitNotConverged : kExitInput;
}

bool emit(const std::string& path, const char* text) {
  if (path.empty()) {
    std::fputs(text, stdout);
    return std::fflush(stdout) == 0;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::cerr << "cqr: cannot write '" << path << "'\n";
    return false;
  }
  return true;
}

struct FitArgs {
  std::string input, response, tau, algorithm, output, format = "json";
  double lambda = 0.0, tol = 0.0, rho = 0.0, eps_mm = 0.0;
  int max_iter = 0;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
  CLI::Option* rho_opt = nullptr;
  CLI::Option* eps_mm_opt = nullptr;
  CLI::Option* max_iter_opt = nullptr;
};

struct SimArgs {
  std::string preset, algorithms, output, format = "json";
  std::size_t n = 0, p = 0;
  int support = -1, reps = 0;
  std::uint64_t seed = 1;
  double lambda = 0.0;
  CLI::Option* lambda_opt = nullptr;
};

int run_fit(const FitArgs& a) {
  std::vector<double> taus;
  for (const auto& s : split_list(a.tau)) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') {
      std::cerr << "cqr: --tau: '" << s << "' is not a number\n";
      return kExitUsage;
    }
    taus.push_back(v);
  }

  cqr_options opts;
  cqr_options_default(&opts);
  if (cqr_parse_algorithm(a.algorithm.c_str(), &opts.algorithm) != CQR_OK) {
    std::cerr << "cqr: " << cqr_last_error() << "\n";
    return kExitUsage;
  }
  if (*a.max_iter_opt) opts.max_iter = a.max_iter;
  if (*a.tol_opt) opts.tol = a.tol;
  if (*a.rho_opt) opts.rho = a.rho;
  if (*a.eps_mm_opt) opts.eps_mm = a.eps_mm;

  cqr_dataset* data = nullptr;
  if (const cqr_status st = cqr_dataset_read_csv(a.input.c_str(), a.response.c_str(), 0, &data);
      st != CQR_OK)
    return report_error("reading input", st);

  const bool regularized = a.lambda_opt->count() > 0;
  cqr_result* result = nullptr;
  const cqr_status st = cqr_fit(data, taus.data(), taus.size(), regularized ? 1 : 0,
                                a.lambda, &opts, &result);
  cqr_dataset_free(data);
  if (st != CQR_OK) return report_error(regularized ? "fit (pilot or penalized stage)" : "fit", st);

  LibString doc;
  const cqr_status ds = a.format == "csv" ? cqr_result_to_csv(result, &doc.p)
                                          : cqr_result_to_json(result, &doc.p);
  const bool converged = cqr_result_converged(result) != 0;
  const int iters = cqr_result_iterations(result);
  cqr_result_free(result);
  if (ds != CQR_OK) return report_error("serializing result", ds);
  if (!emit(a.output, doc.p)) return kExitInput;

  std::cerr << "cqr: " << a.algorithm << " " << (converged ? "converged" : "did not converge")
            << " after " << iters << " iterations\n";
  return converged ? kExitOk : kExitNotConverged;
}

int run_simulate(SimArgs a) {
  if (const char* env = std::getenv("CQR_SEED"); env && *env) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (*end != '\0') {
      std::cerr << "cqr: CQR_SEED='" << env << "' is not an unsigned integer\n";
      return kExitUsage;
    }
    a.seed = v;
  }

  std::vector<cqr_algorithm> algorithms;
  for (const auto& s : split_list(a.algorithms)) {
    cqr_algorithm alg;
    if (cqr_parse_algorithm(s.c_str(), &alg) != CQR_OK) {
      std::cerr << "cqr: " << cqr_last_error() << "\n";
      return kExitUsage;
    }
    algorithms.push_back(alg);
  }

  cqr_sim_config cfg{};
  cfg.preset = a.preset.c_str();
  cfg.n = a.n;
  cfg.p = a.p;
  cfg.support = a.support;
  cfg.reps = a.reps;
  cfg.seed = a.seed;
  cfg.has_lambda = *a.lambda_opt ? 1 : 0;
  cfg.lambda = a.lambda;
  cfg.algorithms = algorithms.data();
  cfg.num_algorithms = algorithms.size();

  cqr_report* report = nullptr;
  if (const cqr_status st = cqr_simulate(&cfg, &report); st != CQR_OK)
    return report_error("simulation", st);
  LibString doc;
  const cqr_status ds = a.format == "csv" ? cqr_report_to_csv(report, &doc.p)
                                          : cqr_report_to_json(report, &doc.p);
  const std::size_t flagged = cqr_report_num_flagged(report);
  cqr_report_free(report);
  if (ds != CQR_OK) return report_error("serializing report", ds);
  if (!emit(a.output, doc.p)) return kExitInput;
  if (flagged > 0) {
    std::cerr << "cqr: " << flagged << " row(s) had more than 20% failed replications\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantile and composite quantile regression solvers"};
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit a model to a CSV table");
  fit->add_option("--input", fa.input, "CSV file with one header row")->required();
  fit->add_option("--response", fa.response, "Name of the response column")->required();
  fit->add_option("--tau", fa.tau, "Comma-separated quantile levels")->required();
  fit->add_option("--algorithm", fa.algorithm, "admm, mm, cd or ip")
      ->required()
      ->check(CLI::IsMember({"admm", "mm", "cd", "ip"}, CLI::ignore_case));
  fa.lambda_opt = fit->add_option("--lambda", fa.lambda, "Adaptive-lasso penalty level");
  fa.max_iter_opt = fit->add_option("--max-iter", fa.max_iter, "Iteration limit");
  fa.tol_opt = fit->add_option("--tol", fa.tol, "Convergence tolerance");
  fa.rho_opt = fit->add_option("--rho", fa.rho, "ADMM penalty parameter");
  fa.eps_mm_opt = fit->add_option("--eps-mm", fa.eps_mm, "MM perturbation");
  fit->add_option("--output", fa.output, "Write the document here instead of stdout");
  fit->add_option("--format", fa.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  SimArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo experiment");
  sim->add_option("--preset", sa.preset, "qr-noreg, cqr-noreg, qr-reg or cqr-reg")
      ->required()
      ->check(CLI::IsMember({"qr-noreg", "cqr-noreg", "qr-reg", "cqr-reg"}));
  sim->add_option("--n", sa.n, "Sample size")->required()->check(CLI::PositiveNumber);
  sim->add_option("--p", sa.p, "Number of covariates")->required()->check(CLI::PositiveNumber);
  sim->add_option("--support", sa.support, "Number of nonzero true coefficients")
      ->check(CLI::NonNegativeNumber);
  sim->add_option("--reps", sa.reps, "Replications")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sa.seed, "Base seed (CQR_SEED overrides)");
  sa.lambda_opt = sim->add_option("--lambda", sa.lambda, "Penalty level; default sqrt(n log p)/4");
  sim->add_option("--algorithms", sa.algorithms, "Comma-separated algorithms")->required();
  sim->add_option("--output", sa.output, "Report path")->required();
  sim->add_option("--format", sa.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    return kExitUsage;
  }

  if (*fit) return run_fit(fa);
  return run_simulate(sa);
}
