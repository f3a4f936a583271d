#include "cqr/admm.hpp"

#include <algorithm>
#include <cmath>

#include "linalg.hpp"

namespace cqr {

double admm_residual_update(double c, double tau, double rho) noexcept {
  // rho_tau(r) = |r|/2 + (tau - 1/2) r, so the prox is a shifted soft threshold.
  return soft_threshold(c - (2.0 * tau - 1.0) / (2.0 * rho), 1.0 / (2.0 * rho));
}

AdmmStopCheck admm_stopping(const AdmmState& state, const CompositeDesign& design,
                            const SolverOptions& opts, bool regularized) {
  const Index k = design.k;
  const Index cols = design.xs.cols();
  const Index p = cols - k;
  const auto rows = static_cast<double>(design.xs.rows());

  AdmmStopCheck out;
  const VectorXd fitted = design.xs * state.beta;
  out.primal_norm = (design.ys - fitted - state.r).norm();

  const VectorXd dr = state.r - state.r_prev;
  const double xtu_sq = (design.xs.transpose() * state.u).squaredNorm();

  if (regularized) {
    const auto covariates = design.xs.rightCols(p);
    out.dual_norm = opts.rho * (covariates.transpose() * dr).norm();
    const VectorXd b_star = design.xs.leftCols(k) * state.beta.head(k);
    const double scale = std::max({(covariates * state.beta.tail(p)).squaredNorm(),
                                   state.r.squaredNorm(),
                                   (b_star - design.ys).squaredNorm()});
    out.eps_primal = std::sqrt(rows) * opts.eps_abs + opts.eps_rel * scale;
    out.eps_dual = std::sqrt(static_cast<double>(p)) * opts.eps_abs + opts.eps_rel * xtu_sq;
  } else {
    out.dual_norm = opts.rho * (design.xs.transpose() * dr).norm();
    const double scale = std::max({fitted.squaredNorm(), state.r.squaredNorm(),
                                   design.ys.squaredNorm()});
    out.eps_primal = std::sqrt(rows) * opts.eps_abs + opts.eps_rel * scale;
    out.eps_dual = std::sqrt(static_cast<double>(cols)) * opts.eps_abs + opts.eps_rel * xtu_sq;
  }
  out.stop = out.primal_norm <= out.eps_primal && out.dual_norm <= out.eps_dual;
  return out;
}

PenalizedLeastSquares::PenalizedLeastSquares(const MatrixXd& a, Index unpenalized)
    : a_(a), unpenalized_(unpenalized) {
  if (unpenalized < 0 || unpenalized > a.cols())
    fail(ErrorKind::Config, "unpenalized count exceeds column count");
  gram_ = a.transpose() * a;
}

PenalizedLeastSquares::Outcome PenalizedLeastSquares::solve(
    const VectorXd& b, double rho, double lambda, const VectorXd& weights,
    const std::vector<bool>& active, VectorXd& beta, double tol,
    int max_sweeps) const {
  const Index cols = a_.cols();
  const Index penalized = cols - unpenalized_;
  if (b.size() != a_.rows()) fail(ErrorKind::Config, "penalized_ls: rhs length mismatch");
  if (weights.size() != penalized || static_cast<Index>(active.size()) != penalized)
    fail(ErrorKind::Config, "penalized_ls: weight/mask length mismatch");
  if (beta.size() != cols) beta = VectorXd::Zero(cols);

  Outcome out;
  for (Index j = 0; j < penalized; ++j)
    if (!active[static_cast<size_t>(j)]) beta[unpenalized_ + j] = 0.0;

  // g = A'b - G beta, maintained as coordinates move.
  VectorXd g = a_.transpose() * b - gram_ * beta;
  for (Index j = 0; j < cols; ++j)
    if (gram_(j, j) <= 0.0) {
      ++out.zero_columns;
      if (beta[j] != 0.0) {
        g.noalias() += gram_.col(j) * beta[j];
        beta[j] = 0.0;
      }
    }

  for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
    double max_change = 0.0;
    for (Index j = 0; j < cols; ++j) {
      const double gjj = gram_(j, j);
      if (gjj <= 0.0) continue;
      double next;
      if (j < unpenalized_) {
        next = beta[j] + g[j] / gjj;
      } else {
        const Index m = j - unpenalized_;
        if (!active[static_cast<size_t>(m)]) continue;
        next = soft_threshold(g[j] + gjj * beta[j], lambda * weights[m] / rho) / gjj;
      }
      const double delta = next - beta[j];
      if (delta != 0.0) {
        g.noalias() -= gram_.col(j) * delta;
        beta[j] = next;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < tol) {
      out.converged = true;
      break;
    }
  }
  out.sweeps = std::min(out.sweeps, max_sweeps);
  return out;
}

VectorXd penalized_ls(const MatrixXd& a, const VectorXd& b, double rho,
                      double lambda, const VectorXd& weights,
                      const std::vector<bool>& active, Index unpenalized,
                      double tol, int max_sweeps) {
  if (!(lambda >= 0.0)) fail(ErrorKind::Domain, "penalized_ls: lambda must be nonnegative");
  if (!(rho > 0.0)) fail(ErrorKind::Domain, "penalized_ls: rho must be positive");
  PenalizedLeastSquares solver(a, unpenalized);
  VectorXd beta = VectorXd::Zero(a.cols());
  solver.solve(b, rho, lambda, weights, active, beta, tol, max_sweeps);
  return beta;
}

FitResult fit_admm(const Dataset& data, const QuantileLevels& levels,
                   const PenaltySpec& penalty, const SolverOptions& opts) {
  opts.validate();
  const ResolvedPenalty pen = ResolvedPenalty::from(penalty, data.p());
  const CompositeDesign design = stack_composite(data, levels);
  const Index k = levels.size();
  const Index cols = design.xs.cols();
  const double rho = opts.rho;

  FitResult result;
  result.algorithm = Algorithm::Admm;

  AdmmState state;
  state.beta = VectorXd::Zero(cols);
  state.r = design.ys;
  state.r_prev = state.r;
  state.u = VectorXd::Zero(design.ys.size());

  detail::SpdFactor normal;
  std::optional<PenalizedLeastSquares> lasso;
  if (pen.enabled) {
    lasso.emplace(design.xs, k);
  } else {
    normal.compute(design.xs.transpose() * design.xs);
    result.diagnostics.ridge_fallback = normal.ridged();
  }

  VectorXd fitted = VectorXd::Zero(design.ys.size());
  AdmmStopCheck check;
  for (int t = 1; t <= opts.max_iter; ++t) {
    state.iteration = t;
    state.r_prev = state.r;
    for (Index i = 0; i < state.r.size(); ++i) {
      const double c = design.ys[i] - fitted[i] + state.u[i] / rho;
      state.r[i] = admm_residual_update(c, design.taus[i], rho);
    }

    const VectorXd target = design.ys - state.r + state.u / rho;
    if (pen.enabled) {
      const auto inner = lasso->solve(target, rho, pen.lambda, pen.weights, pen.active,
                                      state.beta, opts.tol / 10.0, 200);
      result.diagnostics.skipped_coordinates = inner.zero_columns;
    } else {
      state.beta = normal.solve(design.xs.transpose() * target);
    }

    fitted.noalias() = design.xs * state.beta;
    state.u.noalias() += rho * (design.ys - state.r - fitted);

    check = admm_stopping(state, design, opts, pen.enabled);
    if (check.stop) {
      result.converged = true;
      break;
    }
  }

  result.iterations = state.iteration;
  result.intercepts = state.beta.head(k);
  result.coefficients = state.beta.tail(data.p());
  result.objective = objective(data, result.intercepts, result.coefficients, levels, penalty);

  AdmmSnapshot snap;
  snap.beta = state.beta;
  snap.r = state.r;
  snap.r_prev = state.r_prev;
  snap.u = state.u;
  snap.regularized = pen.enabled;
  snap.primal_norm = check.primal_norm;
  snap.dual_norm = check.dual_norm;
  snap.eps_primal = check.eps_primal;
  snap.eps_dual = check.eps_dual;
  result.diagnostics.admm = std::move(snap);
  return result;
}

}  // namespace cqr
