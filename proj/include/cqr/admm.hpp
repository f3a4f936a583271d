#pragma once

#include <vector>

#include "cqr/core.hpp"

namespace cqr {

/// Iterate of the residual-splitting ADMM on the stacked design.
struct AdmmState {
  VectorXd beta;    // intercepts then covariates
  VectorXd r;       // r^{(t+1)}
  VectorXd r_prev;  // r^{(t)}
  VectorXd u;       // scaled multiplier
  int iteration = 0;
};

struct AdmmStopCheck {
  bool stop = false;
  double primal_norm = 0.0;
  double dual_norm = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
};

/// Primal/dual residual test. The regularized variant drops the intercept
/// columns from the dual residual and measures the intercept-broadcast gap
/// b* - Y*; the unregularized variant uses the full design and Y*.
AdmmStopCheck admm_stopping(const AdmmState& state, const CompositeDesign& design,
                            const SolverOptions& opts, bool regularized);

/// Proximal residual update: argmin_r rho_tau(r) + (rho/2)(c - r)^2.
double admm_residual_update(double c, double tau, double rho) noexcept;

/// Cyclic coordinate solver for
///   (rho/2)||b - A beta||^2 + lambda * sum_j w_j |beta_j|
/// where the first `unpenalized` coefficients carry no penalty. The Gram
/// matrix is cached so repeated solves against the same A are cheap.
class PenalizedLeastSquares {
 public:
  PenalizedLeastSquares(const MatrixXd& a, Index unpenalized);

  struct Outcome {
    int sweeps = 0;
    bool converged = false;
    int zero_columns = 0;
  };

  /// `beta` is the warm start and receives the solution. `weights` and
  /// `active` index the penalized coefficients only.
  Outcome solve(const VectorXd& b, double rho, double lambda,
                const VectorXd& weights, const std::vector<bool>& active,
                VectorXd& beta, double tol, int max_sweeps) const;

  const MatrixXd& gram() const noexcept { return gram_; }

 private:
  const MatrixXd& a_;
  Index unpenalized_;
  MatrixXd gram_;
};

VectorXd penalized_ls(const MatrixXd& a, const VectorXd& b, double rho,
                      double lambda, const VectorXd& weights,
                      const std::vector<bool>& active, Index unpenalized,
                      double tol = 1e-12, int max_sweeps = 100000);

FitResult fit_admm(const Dataset& data, const QuantileLevels& levels,
                   const PenaltySpec& penalty, const SolverOptions& opts);

}  // namespace cqr
