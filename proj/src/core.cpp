#include "cqr/core.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace cqr {

namespace {

bool all_finite(const MatrixXd& m) { return m.allFinite(); }

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Admm: return "admm";
    case Algorithm::Mm: return "mm";
    case Algorithm::Cd: return "cd";
    case Algorithm::Ip: return "ip";
  }
  return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
  const std::string s = lower(name);
  if (s == "admm") return Algorithm::Admm;
  if (s == "mm") return Algorithm::Mm;
  if (s == "cd") return Algorithm::Cd;
  if (s == "ip") return Algorithm::Ip;
  fail(ErrorKind::Config, "unknown algorithm '" + std::string(name) + "'");
}

Dataset::Dataset(MatrixXd x, VectorXd y) : x_(std::move(x)), y_(std::move(y)) {
  if (y_.size() < 1) fail(ErrorKind::Domain, "dataset needs at least one row");
  if (x_.rows() != y_.size()) {
    std::ostringstream os;
    os << "design has " << x_.rows() << " rows but response has " << y_.size();
    fail(ErrorKind::Config, os.str());
  }
  if (!all_finite(x_)) fail(ErrorKind::Domain, "design contains non-finite values");
  if (!y_.allFinite()) fail(ErrorKind::Domain, "response contains non-finite values");
}

QuantileLevels::QuantileLevels(std::vector<double> levels)
    : levels_(std::move(levels)) {
  if (levels_.empty()) fail(ErrorKind::Domain, "at least one quantile level required");
  for (size_t k = 0; k < levels_.size(); ++k) {
    const double t = levels_[k];
    if (!(t > 0.0 && t < 1.0)) {
      std::ostringstream os;
      os << "quantile level " << t << " outside (0,1)";
      fail(ErrorKind::Domain, os.str());
    }
    if (k > 0 && !(t > levels_[k - 1]))
      fail(ErrorKind::Domain, "quantile levels must be strictly increasing");
  }
}

PenaltySpec PenaltySpec::adaptive_lasso(double lambda,
                                        std::optional<VectorXd> pilot) {
  PenaltySpec s;
  s.kind = PenaltyKind::AdaptiveLasso;
  s.lambda = lambda;
  s.pilot = std::move(pilot);
  return s;
}

void PenaltySpec::validate(Index p) const {
  if (!enabled()) return;
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    fail(ErrorKind::Config, "adaptive lasso requires a finite lambda > 0");
  if (!pilot) fail(ErrorKind::Config, "adaptive lasso requires pilot coefficients");
  if (pilot->size() != p) {
    std::ostringstream os;
    os << "pilot has length " << pilot->size() << ", expected " << p;
    fail(ErrorKind::Config, os.str());
  }
  if (!pilot->allFinite()) fail(ErrorKind::Domain, "pilot contains non-finite values");
}

void SolverOptions::validate() const {
  if (max_iter < 1) fail(ErrorKind::Config, "max_iter must be positive");
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      fail(ErrorKind::Config, std::string(name) + " must be positive");
  };
  positive(tol, "tol");
  positive(rho, "rho");
  positive(eps_mm, "eps_mm");
  positive(eps_abs, "eps_abs");
  positive(eps_rel, "eps_rel");
  if (!(selection_threshold >= 0.0))
    fail(ErrorKind::Config, "selection_threshold must be nonnegative");
}

ResolvedPenalty ResolvedPenalty::from(const PenaltySpec& spec, Index p) {
  spec.validate(p);
  ResolvedPenalty out;
  out.active.assign(static_cast<size_t>(p), true);
  out.weights = VectorXd::Zero(p);
  if (!spec.enabled()) return out;
  out.enabled = true;
  out.lambda = spec.lambda;
  auto aw = adaptive_weights(*spec.pilot);
  out.weights = std::move(aw.weights);
  out.active = std::move(aw.active);
  return out;
}

double ResolvedPenalty::value(const VectorXd& beta) const {
  if (!enabled) return 0.0;
  double s = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    if (!active[static_cast<size_t>(j)]) {
      if (beta[j] != 0.0) return std::numeric_limits<double>::infinity();
      continue;
    }
    s += weights[j] * std::abs(beta[j]);
  }
  return lambda * s;
}

double check_loss(double t, double tau) {
  if (!std::isfinite(t)) fail(ErrorKind::Domain, "check_loss: non-finite argument");
  if (!(tau > 0.0 && tau < 1.0)) fail(ErrorKind::Domain, "check_loss: tau outside (0,1)");
  return detail::check_loss_unchecked(t, tau);
}

double objective(const Dataset& data, const VectorXd& intercepts,
                 const VectorXd& beta, const QuantileLevels& levels,
                 const PenaltySpec& penalty) {
  if (intercepts.size() != levels.size())
    fail(ErrorKind::Config, "intercept count does not match quantile levels");
  if (beta.size() != data.p())
    fail(ErrorKind::Config, "coefficient count does not match design columns");
  const ResolvedPenalty pen = ResolvedPenalty::from(penalty, data.p());

  const VectorXd fitted = data.x() * beta;
  double fidelity = 0.0;
  for (Index k = 0; k < levels.size(); ++k) {
    const double tau = levels[k];
    for (Index i = 0; i < data.n(); ++i)
      fidelity += detail::check_loss_unchecked(
          data.y()[i] - intercepts[k] - fitted[i], tau);
  }
  return fidelity + pen.value(beta);
}

VectorXd soft_threshold(const VectorXd& v, double a) {
  if (!(a >= 0.0)) fail(ErrorKind::Domain, "soft_threshold: negative threshold");
  if (!v.allFinite()) fail(ErrorKind::Domain, "soft_threshold: non-finite input");
  VectorXd out(v.size());
  for (Index i = 0; i < v.size(); ++i) out[i] = soft_threshold(v[i], a);
  return out;
}

double weighted_median(std::span<const double> z, std::span<const double> w) {
  if (z.empty()) fail(ErrorKind::Domain, "weighted_median: empty input");
  if (z.size() != w.size()) fail(ErrorKind::Domain, "weighted_median: length mismatch");
  double total = 0.0;
  for (double wi : w) {
    if (!(wi >= 0.0) || !std::isfinite(wi))
      fail(ErrorKind::Domain, "weighted_median: weights must be finite and nonnegative");
    total += wi;
  }
  if (!(total > 0.0)) fail(ErrorKind::Domain, "weighted_median: all weights are zero");

  std::vector<size_t> order(z.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return z[a] < z[b] || (z[a] == z[b] && a < b);
  });

  const double half = 0.5 * total;
  double cum = 0.0;
  for (size_t idx : order) {
    cum += w[idx];
    if (cum >= half) return z[idx];
  }
  return z[order.back()];  // unreachable up to rounding
}

double sample_quantile(std::span<const double> values, double tau) {
  if (values.empty()) fail(ErrorKind::Domain, "sample_quantile: empty input");
  if (!(tau > 0.0 && tau < 1.0)) fail(ErrorKind::Domain, "sample_quantile: tau outside (0,1)");
  const auto n = static_cast<double>(values.size());
  // n*tau is often an integer in exact arithmetic but not in floating point.
  auto rank = static_cast<long>(std::ceil(n * tau - 1e-9 * std::max(1.0, n)));
  rank = std::clamp(rank, 1L, static_cast<long>(values.size()));
  std::vector<double> v(values.begin(), values.end());
  auto it = v.begin() + (rank - 1);
  std::nth_element(v.begin(), it, v.end());
  return *it;
}

CompositeDesign stack_composite(const Dataset& data,
                                const QuantileLevels& levels) {
  const Index n = data.n();
  const Index p = data.p();
  const Index k = levels.size();
  CompositeDesign d;
  d.n = n;
  d.k = k;
  d.xs = MatrixXd::Zero(n * k, p + k);
  d.ys.resize(n * k);
  d.taus.resize(n * k);
  for (Index b = 0; b < k; ++b) {
    d.xs.block(b * n, b, n, 1).setOnes();
    d.xs.block(b * n, k, n, p) = data.x();
    d.ys.segment(b * n, n) = data.y();
    d.taus.segment(b * n, n).setConstant(levels[b]);
  }
  return d;
}

AdaptiveWeights adaptive_weights(const VectorXd& pilot, double floor) {
  if (!(floor > 0.0)) fail(ErrorKind::Domain, "adaptive_weights: floor must be positive");
  AdaptiveWeights out;
  out.weights = VectorXd::Zero(pilot.size());
  out.active.assign(static_cast<size_t>(pilot.size()), false);
  for (Index j = 0; j < pilot.size(); ++j) {
    if (std::abs(pilot[j]) >= floor) {
      out.weights[j] = 1.0 / (pilot[j] * pilot[j]);
      out.active[static_cast<size_t>(j)] = true;
    }
  }
  return out;
}

MatrixXd residuals(const Dataset& data, const VectorXd& intercepts,
                   const VectorXd& beta) {
  const VectorXd base = data.y() - data.x() * beta;
  MatrixXd r(data.n(), intercepts.size());
  for (Index k = 0; k < intercepts.size(); ++k)
    r.col(k) = base.array() - intercepts[k];
  return r;
}

}  // namespace cqr
