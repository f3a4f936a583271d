#pragma once

// Monte Carlo harness: y_i = b + x_i' beta + e_i with standard normal x and e.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cqr/core.hpp"

namespace cqr {

struct SimConfig {
  Index n = 200;
  Index p = 5;
  Index true_support_size = 5;  // == p means dense truth
  int reps = 50;
  std::uint64_t base_seed = 1;
  QuantileLevels levels{0.3};
  bool regularized = false;
  std::optional<double> lambda;  // default: sqrt(n log p) / 4
  std::vector<Algorithm> algorithms{Algorithm::Admm};
  double selection_threshold = 1e-3;
  double intercept = 1.0;
  SolverOptions options;
  std::string preset;  // label echoed into the report

  void validate() const;
  double effective_lambda() const;
};

struct SimRow {
  Index n = 0;
  Index p = 0;
  Algorithm algorithm = Algorithm::Admm;
  double mean_error = 0.0;
  double mean_n_true = 0.0;
  double mean_n_false = 0.0;
  double mean_seconds = 0.0;
  int reps = 0;
  int failures = 0;
  bool flagged = false;  // more than 20% of replications failed
};

struct SimReport {
  std::string preset;
  std::vector<double> levels;
  bool regularized = false;
  std::optional<double> lambda;
  bool lambda_defaulted = false;
  Index true_support_size = 0;
  std::uint64_t base_seed = 0;
  double intercept = 0.0;
  std::vector<SimRow> rows;
};

/// Dense (support == p): Uniform[-1,1]. Sparse: `support` positions chosen
/// uniformly, magnitudes Uniform[0.5,1] with random sign, the rest zero.
VectorXd generate_truth(Index p, Index support, std::uint64_t seed);

Dataset generate_data(Index n, Index p, const VectorXd& truth, double intercept,
                      std::uint64_t seed);

double coefficient_error(const VectorXd& estimate, const VectorXd& truth);

struct SelectionCounts {
  int n_true = 0;
  int n_false = 0;
};

SelectionCounts selection_counts(const VectorXd& estimate, const VectorXd& truth,
                                 double threshold);

/// Called for every fit that returns, converged or not; lets callers audit
/// solver diagnostics.
using FitObserver = std::function<void(int rep, Algorithm, const FitResult&)>;

/// Replication r uses seed base_seed + r for both truth and data.
SimReport run_experiment(const SimConfig& config, const FitObserver& observer = {});

/// Presets: qr-noreg, cqr-noreg, qr-reg, cqr-reg.
SimConfig preset_config(const std::string& name, Index n, Index p);

}  // namespace cqr
