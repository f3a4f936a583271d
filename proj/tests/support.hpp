#pragma once

// Reference implementations used as test oracles. Deliberately naive: each
// one is a direct scan or enumeration that shares no code with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "cqr/core.hpp"

namespace oracle {

using cqr::Index;
using cqr::MatrixXd;
using cqr::VectorXd;

inline double rho(double t, double tau) { return t >= 0 ? tau * t : (tau - 1.0) * t; }

inline double qr_loss(const MatrixXd& x, const VectorXd& y, double b0, const VectorXd& beta,
                      double tau) {
  double s = 0;
  for (Index i = 0; i < y.size(); ++i) s += rho(y[i] - b0 - x.row(i).dot(beta), tau);
  return s;
}

// Minimum of sum_i w_i |z_i - m| over the candidates m = z_i.
inline double weighted_abs_min(const std::vector<double>& z, const std::vector<double>& w) {
  double best = std::numeric_limits<double>::infinity();
  for (double m : z) {
    double s = 0;
    for (size_t i = 0; i < z.size(); ++i) s += w[i] * std::abs(z[i] - m);
    best = std::min(best, s);
  }
  return best;
}

inline double weighted_abs_sum(const std::vector<double>& z, const std::vector<double>& w, double m) {
  double s = 0;
  for (size_t i = 0; i < z.size(); ++i) s += w[i] * std::abs(z[i] - m);
  return s;
}

// Minimum of sum_i rho_tau(v_i - b) over the order statistics.
inline double quantile_loss_min(const std::vector<double>& v, double tau) {
  double best = std::numeric_limits<double>::infinity();
  for (double b : v) {
    double s = 0;
    for (double vi : v) s += rho(vi - b, tau);
    best = std::min(best, s);
  }
  return best;
}

// Unpenalized QR optimum by enumerating every (p+1)-subset of rows, solving
// the interpolation system and keeping the best objective. Some optimum is
// always attained at such a basic solution.
inline double exhaustive_qr_optimum(const MatrixXd& x, const VectorXd& y, double tau) {
  const Index n = y.size(), p = x.cols(), d = p + 1;
  std::vector<Index> idx(static_cast<size_t>(d));
  for (Index i = 0; i < d; ++i) idx[static_cast<size_t>(i)] = i;
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    MatrixXd a(d, d);
    VectorXd rhs(d);
    for (Index r = 0; r < d; ++r) {
      const Index i = idx[static_cast<size_t>(r)];
      a(r, 0) = 1.0;
      a.row(r).tail(p) = x.row(i);
      rhs[r] = y[i];
    }
    Eigen::FullPivLU<MatrixXd> lu(a);
    if (lu.isInvertible()) {
      const VectorXd theta = lu.solve(rhs);
      best = std::min(best, qr_loss(x, y, theta[0], theta.tail(p), tau));
    }
    Index k = d - 1;
    while (k >= 0 && idx[static_cast<size_t>(k)] == n - d + k) --k;
    if (k < 0) break;
    ++idx[static_cast<size_t>(k)];
    for (Index j = k + 1; j < d; ++j) idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
  }
  return best;
}

struct Instance {
  MatrixXd x;
  VectorXd y;
};

inline Instance gaussian_instance(Index n, Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Instance inst{MatrixXd(n, p), VectorXd(n)};
  VectorXd beta(p);
  for (Index j = 0; j < p; ++j) beta[j] = normal(rng);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) inst.x(i, j) = normal(rng);
    inst.y[i] = 0.5 + inst.x.row(i).dot(beta) + normal(rng);
  }
  return inst;
}

}  // namespace oracle
