#pragma once

#include "cqr/core.hpp"

namespace cqr {

struct CdState {
  VectorXd beta;
  VectorXd intercepts;
  MatrixXd residuals;  // n x K, y_i - b_k - x_i' beta
  double objective = 0.0;

  static CdState start(const Dataset& data, const QuantileLevels& levels,
                       const ResolvedPenalty& penalty, VectorXd beta,
                       VectorXd intercepts);
};

struct CdUpdate {
  double candidate = 0.0;  // proposed value
  double value = 0.0;      // value held after the update
  bool accepted = false;
  bool skipped = false;    // all-zero column
  bool fallback = false;   // exact 1-D minimizer used instead of the median
};

/// Replaces b_k by the tau_k sample quantile of y - X beta, unless rounding
/// would make that an increase. Returns the quantile.
double cd_intercept_update(CdState& state, const Dataset& data,
                           const QuantileLevels& levels,
                           const ResolvedPenalty& penalty, Index k);

/// Weighted-median candidate for beta_m with slope weights taken from the
/// current residual signs; the penalty enters as one pseudo-observation at 0.
/// The candidate is applied only if it strictly lowers the objective. When it
/// does not, the exact coordinate minimizer is tried under the same test.
CdUpdate cd_coordinate_update(CdState& state, const Dataset& data,
                              const QuantileLevels& levels,
                              const ResolvedPenalty& penalty, Index m);

FitResult fit_cd(const Dataset& data, const QuantileLevels& levels,
                 const PenaltySpec& penalty, const SolverOptions& opts);

}  // namespace cqr
