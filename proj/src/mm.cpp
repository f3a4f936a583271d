#include "cqr/mm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "linalg.hpp"

namespace cqr {

namespace {

constexpr double kFreezeBelow = 1e-6;

double smoothed_unchecked(double t, double tau, double eps) noexcept {
  return detail::check_loss_unchecked(t, tau) - 0.5 * eps * std::log(eps + std::abs(t));
}

double majorizer_unchecked(double r, double r_prev, double tau, double eps) noexcept {
  const double curvature = 1.0 / (eps + std::abs(r_prev));
  return smoothed_unchecked(r_prev, tau, eps) +
         0.25 * ((r * r - r_prev * r_prev) * curvature + (4.0 * tau - 2.0) * (r - r_prev));
}

VectorXd quantile_intercepts(const Dataset& data, const QuantileLevels& levels,
                             const VectorXd& beta) {
  const VectorXd base = data.y() - data.x() * beta;
  VectorXd b(levels.size());
  for (Index k = 0; k < levels.size(); ++k)
    b[k] = sample_quantile(std::span<const double>(base.data(), static_cast<size_t>(base.size())),
                           levels[k]);
  return b;
}

}  // namespace

double smoothed_check_loss(double t, double tau, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::Domain, "smoothed_check_loss: eps must be positive");
  return check_loss(t, tau) - 0.5 * eps * std::log(eps + std::abs(t));
}

double majorizer_value(double r, double r_prev, double tau, double eps) {
  if (!(eps > 0.0)) fail(ErrorKind::Domain, "majorizer_value: eps must be positive");
  if (!std::isfinite(r) || !std::isfinite(r_prev))
    fail(ErrorKind::Domain, "majorizer_value: non-finite argument");
  return majorizer_unchecked(r, r_prev, tau, eps);
}

double mm_smoothed_objective(const Dataset& data, const QuantileLevels& levels,
                             const VectorXd& intercepts, const VectorXd& beta,
                             const ResolvedPenalty& penalty, double eps) {
  const VectorXd base = data.y() - data.x() * beta;
  double s = 0.0;
  for (Index k = 0; k < levels.size(); ++k)
    for (Index i = 0; i < data.n(); ++i)
      s += smoothed_unchecked(base[i] - intercepts[k], levels[k], eps);
  if (penalty.enabled) {
    for (Index j = 0; j < beta.size(); ++j) {
      if (!penalty.active[static_cast<size_t>(j)]) continue;
      const double b = std::abs(beta[j]);
      s += penalty.lambda * penalty.weights[j] * (b - eps * std::log(eps + b));
    }
  }
  return s;
}

FitResult fit_mm(const Dataset& data, const QuantileLevels& levels,
                 const PenaltySpec& penalty, const SolverOptions& opts) {
  opts.validate();
  const ResolvedPenalty pen = ResolvedPenalty::from(penalty, data.p());
  const Index n = data.n();
  const Index p = data.p();
  const Index k = levels.size();
  const double eps = opts.eps_mm;
  const MatrixXd& x = data.x();
  const VectorXd& y = data.y();

  FitResult result;
  result.algorithm = Algorithm::Mm;

  // Start: pilot when penalized, least squares otherwise.
  VectorXd beta = VectorXd::Zero(p);
  std::vector<bool> free(static_cast<size_t>(p), true);
  if (pen.enabled) {
    beta = *penalty.pilot;
    for (Index j = 0; j < p; ++j) {
      const auto sj = static_cast<size_t>(j);
      if (!pen.active[sj] || std::abs(beta[j]) < kFreezeBelow) {
        free[sj] = false;
        beta[j] = 0.0;
      }
    }
  } else if (p > 0) {
    MatrixXd z(n, p + 1);
    z.col(0).setOnes();
    z.rightCols(p) = x;
    detail::SpdFactor ls(z.transpose() * z);
    beta = ls.solve(z.transpose() * y).tail(p);
  }
  VectorXd b = quantile_intercepts(data, levels, beta);

  double current = mm_smoothed_objective(data, levels, b, beta, pen, eps);
  if (opts.record_trace) result.diagnostics.objective_trace.push_back(current);

  MatrixXd a(n, k);
  VectorXd base(n);
  for (int t = 1; t <= opts.max_iter; ++t) {
    result.iterations = t;
    std::vector<Index> idx;
    for (Index j = 0; j < p; ++j)
      if (free[static_cast<size_t>(j)]) idx.push_back(j);
    const auto f = static_cast<Index>(idx.size());

    base.noalias() = y - x * beta;
    for (Index kk = 0; kk < k; ++kk)
      for (Index i = 0; i < n; ++i)
        a(i, kk) = 0.25 / (eps + std::abs(base[i] - b[kk]));

    MatrixXd xf(n, f);
    for (Index c = 0; c < f; ++c) xf.col(c) = x.col(idx[static_cast<size_t>(c)]);

    // Normal equations of the quadratic majorizer over (intercepts, free betas).
    const VectorXd row_weight = a.rowwise().sum();
    VectorXd row_rhs = VectorXd::Zero(n);
    MatrixXd h = MatrixXd::Zero(k + f, k + f);
    VectorXd rhs(k + f);
    for (Index kk = 0; kk < k; ++kk) {
      const double shift = levels[kk] - 0.5;
      h(kk, kk) = 2.0 * a.col(kk).sum();
      const VectorXd col = 2.0 * a.col(kk);
      if (f > 0) {
        h.block(kk, k, 1, f) = col.transpose() * xf;
        h.block(k, kk, f, 1) = h.block(kk, k, 1, f).transpose();
      }
      rhs[kk] = (col.array() * y.array()).sum() + shift * static_cast<double>(n);
      row_rhs.array() += col.array() * y.array() + shift;
    }
    VectorXd penalty_curv = VectorXd::Zero(f);
    if (f > 0) {
      h.block(k, k, f, f).noalias() = 2.0 * xf.transpose() * row_weight.asDiagonal() * xf;
      if (pen.enabled) {
        for (Index c = 0; c < f; ++c) {
          const Index j = idx[static_cast<size_t>(c)];
          penalty_curv[c] = pen.lambda * pen.weights[j] / (2.0 * (eps + std::abs(beta[j])));
          h(k + c, k + c) += 2.0 * penalty_curv[c];
        }
      }
      rhs.tail(f).noalias() = xf.transpose() * row_rhs;
    }

    detail::SpdFactor factor(h);
    if (factor.ridged()) result.diagnostics.ridge_fallback = true;
    const VectorXd theta = factor.solve(rhs);
    if (!theta.allFinite()) fail(ErrorKind::Numerical, "MM majorizer solve produced non-finite values");

    VectorXd next_beta = beta;
    for (Index c = 0; c < f; ++c) next_beta[idx[static_cast<size_t>(c)]] = theta[k + c];
    const VectorXd next_b = theta.head(k);

    // Majorizer value at the candidate versus at the current point (where it
    // equals the smoothed objective). A non-decrease means the exact minimizer
    // is indistinguishable from the current point.
    const VectorXd next_base = y - x * next_beta;
    double q_next = 0.0;
    for (Index kk = 0; kk < k; ++kk)
      for (Index i = 0; i < n; ++i)
        q_next += majorizer_unchecked(next_base[i] - next_b[kk], base[i] - b[kk], levels[kk], eps);
    double q_here = 0.0;
    for (Index kk = 0; kk < k; ++kk)
      for (Index i = 0; i < n; ++i)
        q_here += smoothed_unchecked(base[i] - b[kk], levels[kk], eps);
    if (pen.enabled) {
      for (Index c = 0; c < f; ++c) {
        const Index j = idx[static_cast<size_t>(c)];
        q_next += penalty_curv[c] * (next_beta[j] * next_beta[j] - beta[j] * beta[j]);
      }
    }
    if (q_next >= q_here) {
      result.converged = true;
      break;
    }

    double change = (next_b - b).cwiseAbs().maxCoeff();
    if (p > 0) change = std::max(change, (next_beta - beta).cwiseAbs().maxCoeff());

    const double next_value = mm_smoothed_objective(data, levels, next_b, next_beta, pen, eps);
    if (next_value > current + 1e-10) ++result.diagnostics.descent_violations;
    if (opts.record_trace) result.diagnostics.objective_trace.push_back(next_value);

    beta = next_beta;
    b = next_b;
    current = next_value;

    if (pen.enabled) {
      bool frozen_any = false;
      for (Index j : idx) {
        if (std::abs(beta[j]) < kFreezeBelow) {
          free[static_cast<size_t>(j)] = false;
          beta[j] = 0.0;
          frozen_any = true;
        }
      }
      // Freezing is a projection, not a majorizer step; re-baseline.
      if (frozen_any) current = mm_smoothed_objective(data, levels, b, beta, pen, eps);
    }

    if (change < opts.tol) {
      result.converged = true;
      break;
    }
  }

  result.intercepts = b;
  result.coefficients = beta;
  result.objective = objective(data, b, beta, levels, penalty);
  return result;
}

}  // namespace cqr
