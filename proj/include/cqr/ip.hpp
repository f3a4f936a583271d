#pragma once

#include <Eigen/Sparse>

#include <string_view>

#include "cqr/core.hpp"

namespace cqr {

/// min c'x + c0  s.t.  lc <= A x <= uc,  lx <= x <= ux   (infinite bounds allowed)
struct LinearProgram {
  VectorXd c;
  double c0 = 0.0;
  Eigen::SparseMatrix<double> a;
  VectorXd lc, uc;
  VectorXd lx, ux;

  Index num_vars() const noexcept { return c.size(); }
  Index num_rows() const noexcept { return a.rows(); }
  void validate() const;
};

enum class LpStatus { Optimal, MaxIter, Infeasible, Unbounded };

std::string_view to_string(LpStatus s);

struct LpSolution {
  VectorXd x;
  VectorXd dual;  // one multiplier per constraint row
  double objective = 0.0;
  double dual_objective = 0.0;
  LpStatus status = LpStatus::MaxIter;
  int iterations = 0;
  double primal_residual = 0.0;  // relative, infinity norm
  double dual_residual = 0.0;    // relative, infinity norm
  double gap = 0.0;              // |primal - dual| / (1 + |primal|)
};

/// Mehrotra predictor-corrector path following. Free variables are kept
/// unsplit and eliminated through a Schur complement.
LpSolution solve_lp(const LinearProgram& lp, const SolverOptions& opts);

/// Where each parameter of a (composite) quantile regression lives in the LP.
struct QrLpLayout {
  Index n = 0;
  Index p = 0;
  Index k = 0;
  bool penalized = false;

  Index intercept(Index level) const { return level; }
  Index beta(Index j) const { return k + j; }
  Index u(Index level, Index i) const { return k + p + level * 2 * n + i; }
  Index v(Index level, Index i) const { return k + p + level * 2 * n + n + i; }
  Index beta_bound(Index j) const { return k + p + 2 * n * k + j; }
  Index num_vars() const { return k + p + 2 * n * k + (penalized ? p : 0); }
  Index num_rows() const { return n * k + (penalized ? 2 * p : 0); }

  void unpack(const VectorXd& x, VectorXd& intercepts, VectorXd& beta) const;
};

struct QrLinearProgram {
  LinearProgram lp;
  QrLpLayout layout;
};

/// Variables: intercepts and beta free; u_k, v_k >= 0 per level; beta* >= 0
/// when penalized. Rows: b_k + X beta + u_k - v_k = Y per level, then
/// beta - beta* <= 0 and -beta - beta* <= 0.
QrLinearProgram build_qr_lp(const Dataset& data, const QuantileLevels& levels,
                            const PenaltySpec& penalty);

FitResult fit_ip(const Dataset& data, const QuantileLevels& levels,
                 const PenaltySpec& penalty, const SolverOptions& opts);

}  // namespace cqr
