#pragma once

#include <optional>

#include "cqr/core.hpp"

namespace cqr {

struct FitRequest {
  Dataset data;
  QuantileLevels levels;
  bool regularized = false;
  double lambda = 0.0;
  SolverOptions options;  // options.algorithm selects the solver
  std::optional<Algorithm> pilot_algorithm;  // defaults to options.algorithm
};

/// Runs one solver on an explicit penalty.
FitResult solve(Algorithm algorithm, const Dataset& data,
                const QuantileLevels& levels, const PenaltySpec& penalty,
                const SolverOptions& opts);

/// Unregularized requests go straight to the solver. Regularized requests
/// first fit the unpenalized pilot, derive adaptive weights from it, then
/// fit the penalized problem. Throws Convergence if the pilot stage fails.
FitResult fit(const FitRequest& request);

}  // namespace cqr
