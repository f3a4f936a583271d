#pragma once

#include "cqr/core.hpp"

namespace cqr {

struct MmState {
  VectorXd beta;       // intercepts then covariates
  MatrixXd residuals;  // n x K
  double eps = 1e-4;
};

/// rho_tau(t) - (eps/2) ln(eps + |t|).
double smoothed_check_loss(double t, double tau, double eps);

/// Quadratic majorizer of the smoothed check loss, tangent at r_prev.
double majorizer_value(double r, double r_prev, double tau, double eps);

/// Smoothed objective the MM iteration descends: smoothed fidelity plus the
/// penalty surrogate lambda w_j (|b| - eps ln(eps + |b|)) on free coefficients.
double mm_smoothed_objective(const Dataset& data, const QuantileLevels& levels,
                             const VectorXd& intercepts, const VectorXd& beta,
                             const ResolvedPenalty& penalty, double eps);

FitResult fit_mm(const Dataset& data, const QuantileLevels& levels,
                 const PenaltySpec& penalty, const SolverOptions& opts);

}  // namespace cqr
