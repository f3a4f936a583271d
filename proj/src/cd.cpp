#include "cqr/cd.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace cqr {

namespace {

double penalty_term(const ResolvedPenalty& pen, Index m, double value) {
  if (!pen.enabled) return 0.0;
  return pen.lambda * pen.weights[m] * std::abs(value);
}

double state_objective(const CdState& s, const QuantileLevels& levels,
                       const ResolvedPenalty& pen) {
  double total = 0.0;
  for (Index k = 0; k < s.residuals.cols(); ++k)
    for (Index i = 0; i < s.residuals.rows(); ++i)
      total += detail::check_loss_unchecked(s.residuals(i, k), levels[k]);
  return total + pen.value(s.beta);
}

// Exact minimizer of sum_i w_i rho_{t_i}(z_i - b): the first sorted breakpoint
// at which the cumulative weight reaches sum_i w_i t_i.
double weighted_check_minimizer(const std::vector<double>& z, const std::vector<double>& w,
                                const std::vector<double>& t) {
  std::vector<size_t> order(z.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return z[a] < z[b] || (z[a] == z[b] && a < b);
  });
  double target = 0.0;
  for (size_t i = 0; i < z.size(); ++i) target += w[i] * t[i];
  double cum = 0.0;
  for (size_t idx : order) {
    cum += w[idx];
    if (cum >= target) return z[idx];
  }
  return z[order.back()];
}

double coordinate_delta(const CdState& state, const Dataset& data, const QuantileLevels& levels,
                        const ResolvedPenalty& penalty, Index m, double value) {
  const auto xm = data.x().col(m);
  const double step = value - state.beta[m];
  double delta = penalty_term(penalty, m, value) - penalty_term(penalty, m, state.beta[m]);
  for (Index kk = 0; kk < levels.size(); ++kk) {
    const double tau = levels[kk];
    for (Index i = 0; i < data.n(); ++i) {
      const double r = state.residuals(i, kk);
      delta += detail::check_loss_unchecked(r - xm[i] * step, tau) -
               detail::check_loss_unchecked(r, tau);
    }
  }
  return delta;
}

void apply_step(CdState& state, const Dataset& data, Index m, double value, double delta) {
  const double step = value - state.beta[m];
  for (Index kk = 0; kk < state.residuals.cols(); ++kk)
    state.residuals.col(kk).noalias() -= step * data.x().col(m);
  state.beta[m] = value;
  state.objective += delta;
}

// Stall recovery. Plain coordinate moves can stop on a face of the
// piecewise-linear objective where no single coordinate helps even though a
// joint move does. FaceWalk parametrizes (intercepts, active slopes) as one
// vector and minimizes exactly along directions that keep the currently zero
// residuals at zero, or release exactly one of them.
class FaceWalk {
 public:
  FaceWalk(CdState& state, const Dataset& data, const QuantileLevels& levels,
           const ResolvedPenalty& pen)
      : state_(state), data_(data), levels_(levels), pen_(pen) {
    for (Index j = 0; j < data.p(); ++j)
      if (!pen.enabled || pen.active[static_cast<size_t>(j)]) cols_.push_back(j);
    k_ = levels.size();
    dim_ = k_ + static_cast<Index>(cols_.size());
    xa_.resize(data.n(), static_cast<Index>(cols_.size()));
    for (size_t c = 0; c < cols_.size(); ++c) xa_.col(static_cast<Index>(c)) = data.x().col(cols_[c]);
    zero_tol_ = 1e-10 * (1.0 + data.y().cwiseAbs().maxCoeff());
  }

  // Runs until neither a face direction nor an edge improves the objective.
  // Returns the number of moves taken.
  int run(int max_moves) {
    int moves = 0;
    while (moves < max_moves && step()) ++moves;
    return moves;
  }

 private:
  Index nfid() const { return data_.n() * k_; }
  Index npen() const { return pen_.enabled ? static_cast<Index>(cols_.size()) : 0; }

  // Row r of the stacked problem: fidelity rows (level-major), then one
  // penalty row per active slope.
  double row_value(Index r) const {
    if (r < nfid()) return state_.residuals(r % data_.n(), r / data_.n());
    return state_.beta[cols_[static_cast<size_t>(r - nfid())]];
  }
  double row_tau(Index r) const { return r < nfid() ? levels_[r / data_.n()] : 0.5; }
  double row_weight(Index r) const {
    if (r < nfid()) return 1.0;
    return 2.0 * pen_.lambda * pen_.weights[cols_[static_cast<size_t>(r - nfid())]];
  }
  VectorXd row_coeffs(Index r) const {
    VectorXd a = VectorXd::Zero(dim_);
    if (r < nfid()) {
      a[r / data_.n()] = 1.0;
      a.tail(dim_ - k_) = xa_.row(r % data_.n()).transpose();
    } else {
      a[k_ + (r - nfid())] = 1.0;
    }
    return a;
  }
  // Rate of change of each row under a move d of the parameters; fidelity
  // residuals move by -c, penalty rows by +c. Returned with the sign that
  // makes every row read "value - c s".
  VectorXd row_rates(const VectorXd& d) const {
    VectorXd c(nfid() + npen());
    const VectorXd xd = xa_ * d.tail(dim_ - k_);
    for (Index kk = 0; kk < k_; ++kk) c.segment(kk * data_.n(), data_.n()) = xd.array() + d[kk];
    for (Index j = 0; j < npen(); ++j) c[nfid() + j] = -d[k_ + j];
    return c;
  }

  // Exact minimizer over s of the objective at theta + s d, as (s, delta).
  std::pair<double, double> line_search(const VectorXd& d) {
    const VectorXd c = row_rates(d);
    z_.clear();
    w_.clear();
    t_.clear();
    for (Index r = 0; r < c.size(); ++r) {
      if (std::abs(c[r]) < 1e-14 || row_weight(r) == 0.0) continue;
      z_.push_back(row_value(r) / c[r]);
      w_.push_back(row_weight(r) * std::abs(c[r]));
      t_.push_back(c[r] > 0.0 ? row_tau(r) : 1.0 - row_tau(r));
    }
    if (z_.empty()) return {0.0, 0.0};
    const double s = weighted_check_minimizer(z_, w_, t_);
    if (s == 0.0) return {0.0, 0.0};
    double delta = 0.0;
    for (Index r = 0; r < c.size(); ++r) {
      const double v = row_value(r);
      delta += row_weight(r) * (detail::check_loss_unchecked(v - c[r] * s, row_tau(r)) -
                                detail::check_loss_unchecked(v, row_tau(r)));
    }
    return {s, delta};
  }

  void apply(const VectorXd& move) {
    for (Index kk = 0; kk < k_; ++kk) state_.intercepts[kk] += move[kk];
    for (size_t c = 0; c < cols_.size(); ++c) {
      double& b = state_.beta[cols_[c]];
      b += move[k_ + static_cast<Index>(c)];
      if (pen_.enabled && std::abs(b) <= 1e-14) b = 0.0;
    }
    state_.residuals = cqr::residuals(data_, state_.intercepts, state_.beta);
    state_.objective = state_objective(state_, levels_, pen_);
  }

  bool step() {
    const double threshold = -1e-12 * (1.0 + std::abs(state_.objective));
    const Index rows = nfid() + npen();

    std::vector<Index> zero;
    for (Index r = 0; r < rows; ++r) {
      const bool is_zero = r < nfid() ? std::abs(row_value(r)) <= zero_tol_ : row_value(r) == 0.0;
      if (is_zero && row_weight(r) > 0.0) zero.push_back(r);
    }
    MatrixXd held(0, dim_);
    if (!zero.empty()) {
      MatrixXd az_t(dim_, static_cast<Index>(zero.size()));
      for (size_t z = 0; z < zero.size(); ++z) az_t.col(static_cast<Index>(z)) = row_coeffs(zero[z]);
      const Eigen::ColPivHouseholderQR<MatrixXd> qr(az_t);
      held.resize(qr.rank(), dim_);
      for (Index j = 0; j < qr.rank(); ++j)
        held.row(j) = az_t.col(qr.colsPermutation().indices()[j]).transpose();
    }
    const Index rank = held.rows();
    Eigen::LDLT<MatrixXd> gram;
    if (rank > 0) gram.compute(held * held.transpose());

    // Objective is linear on the face; follow its projected negative gradient.
    if (rank < dim_) {
      VectorXd grad = VectorXd::Zero(dim_);
      for (Index r = 0; r < rows; ++r) {
        const double v = row_value(r);
        if (std::abs(v) <= zero_tol_ && r < nfid()) continue;
        if (v == 0.0) continue;
        const double slope = v > 0.0 ? row_tau(r) : row_tau(r) - 1.0;
        // d/dtheta of weight * rho(v - c s) at s = 0 is -weight * slope * c.
        const double sign = r < nfid() ? -1.0 : 1.0;
        grad += sign * row_weight(r) * slope * row_coeffs(r);
      }
      VectorXd d = -grad;
      if (rank > 0) d -= held.transpose() * gram.solve(held * d);
      if (d.norm() > 1e-12 * (1.0 + grad.norm())) {
        const auto [s, delta] = line_search(d);
        if (delta < threshold) {
          apply(s * d);
          return true;
        }
      }
    }

    // Edges: release one held row, keep the others at zero.
    if (rank == 0) return false;
    const MatrixXd edges = held.transpose() * gram.solve(MatrixXd::Identity(rank, rank));
    double best = threshold;
    VectorXd best_move;
    for (Index e = 0; e < rank; ++e) {
      const VectorXd d = edges.col(e);
      const auto [s, delta] = line_search(d);
      if (delta < best) {
        best = delta;
        best_move = s * d;
      }
    }
    if (best_move.size() == 0) return false;
    apply(best_move);
    return true;
  }

  CdState& state_;
  const Dataset& data_;
  const QuantileLevels& levels_;
  const ResolvedPenalty& pen_;
  std::vector<Index> cols_;
  Index k_ = 0;
  Index dim_ = 0;
  MatrixXd xa_;
  double zero_tol_ = 0.0;
  std::vector<double> z_, w_, t_;
};

}  // namespace

CdState CdState::start(const Dataset& data, const QuantileLevels& levels,
                       const ResolvedPenalty& penalty, VectorXd beta,
                       VectorXd intercepts) {
  CdState s;
  s.beta = std::move(beta);
  s.intercepts = std::move(intercepts);
  s.residuals = cqr::residuals(data, s.intercepts, s.beta);
  s.objective = state_objective(s, levels, penalty);
  return s;
}

double cd_intercept_update(CdState& state, const Dataset& data,
                           const QuantileLevels& levels,
                           const ResolvedPenalty& penalty, Index k) {
  (void)penalty;  // intercepts are never penalized
  const Index n = data.n();
  const double tau = levels[k];
  const auto col = state.residuals.col(k);
  std::vector<double> base(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) base[static_cast<size_t>(i)] = col[i] + state.intercepts[k];
  const double q = sample_quantile(base, tau);

  const double shift = q - state.intercepts[k];
  if (shift == 0.0) return q;
  double delta = 0.0;
  for (Index i = 0; i < n; ++i)
    delta += detail::check_loss_unchecked(col[i] - shift, tau) -
             detail::check_loss_unchecked(col[i], tau);
  if (delta <= 0.0) {
    state.residuals.col(k).array() -= shift;
    state.intercepts[k] = q;
    state.objective += delta;
  }
  return q;
}

CdUpdate cd_coordinate_update(CdState& state, const Dataset& data,
                              const QuantileLevels& levels,
                              const ResolvedPenalty& penalty, Index m) {
  const Index n = data.n();
  const Index k = levels.size();
  const auto xm = data.x().col(m);
  CdUpdate out;
  out.value = state.beta[m];
  if (penalty.enabled && !penalty.active[static_cast<size_t>(m)]) {
    out.candidate = 0.0;
    return out;
  }

  std::vector<double> z;
  std::vector<double> w;
  std::vector<double> t;  // check-loss level seen by each breakpoint
  z.reserve(static_cast<size_t>(n * k + 1));
  w.reserve(static_cast<size_t>(n * k + 1));
  t.reserve(static_cast<size_t>(n * k + 1));
  const double current = state.beta[m];
  for (Index kk = 0; kk < k; ++kk) {
    const double tau = levels[kk];
    for (Index i = 0; i < n; ++i) {
      const double xi = xm[i];
      if (xi == 0.0) continue;
      const double r = state.residuals(i, kk);
      z.push_back((r + xi * current) / xi);
      w.push_back(std::abs(xi) * (r >= 0.0 ? tau : 1.0 - tau));
      t.push_back(xi > 0.0 ? tau : 1.0 - tau);
    }
  }
  if (z.empty()) {
    out.skipped = true;
    out.candidate = current;
    return out;
  }
  if (penalty.enabled) {
    z.push_back(0.0);
    w.push_back(penalty.lambda * penalty.weights[m]);
  }
  out.candidate = weighted_median(z, w);

  if (out.candidate != current) {
    const double delta = coordinate_delta(state, data, levels, penalty, m, out.candidate);
    if (delta < 0.0) {
      apply_step(state, data, m, out.candidate, delta);
      out.accepted = true;
      out.value = out.candidate;
      return out;
    }
  }

  // The slope weights only describe the objective up to the nearest sign
  // change, so the median can miss the coordinate minimum. Fall back to the
  // exact one-dimensional minimizer.
  for (Index kk = 0, idx = 0; kk < k; ++kk)
    for (Index i = 0; i < n; ++i)
      if (xm[i] != 0.0) w[static_cast<size_t>(idx++)] = std::abs(xm[i]);
  if (penalty.enabled) {
    w.back() = 2.0 * penalty.lambda * penalty.weights[m];
    t.push_back(0.5);
  }
  const double exact = weighted_check_minimizer(z, w, t);
  if (exact == current) return out;
  const double delta = coordinate_delta(state, data, levels, penalty, m, exact);
  if (delta < 0.0) {
    apply_step(state, data, m, exact, delta);
    out.accepted = true;
    out.fallback = true;
    out.value = exact;
  }
  return out;
}

FitResult fit_cd(const Dataset& data, const QuantileLevels& levels,
                 const PenaltySpec& penalty, const SolverOptions& opts) {
  opts.validate();
  const ResolvedPenalty pen = ResolvedPenalty::from(penalty, data.p());
  const Index p = data.p();
  const Index k = levels.size();

  FitResult result;
  result.algorithm = Algorithm::Cd;

  VectorXd start_b(k);
  for (Index kk = 0; kk < k; ++kk)
    start_b[kk] = sample_quantile(
        std::span<const double>(data.y().data(), static_cast<size_t>(data.n())), levels[kk]);
  CdState state = CdState::start(data, levels, pen, VectorXd::Zero(p), start_b);

  const bool audit = opts.record_trace;
  double audited = state.objective;
  auto audit_step = [&]() {
    if (!audit) return;
    const double now = state_objective(state, levels, pen);
    if (now > audited + 1e-12 * (1.0 + std::abs(audited)))
      ++result.diagnostics.monotonicity_violations;
    result.diagnostics.objective_trace.push_back(now);
    audited = now;
  };
  if (audit) result.diagnostics.objective_trace.push_back(audited);

  int skipped = 0;
  for (int sweep = 1; sweep <= opts.max_iter; ++sweep) {
    result.iterations = sweep;
    double change = 0.0;
    for (Index kk = 0; kk < k; ++kk) {
      const double before = state.intercepts[kk];
      cd_intercept_update(state, data, levels, pen, kk);
      change = std::max(change, std::abs(state.intercepts[kk] - before));
      audit_step();
    }
    skipped = 0;
    for (Index m = 0; m < p; ++m) {
      const double before = state.beta[m];
      const CdUpdate u = cd_coordinate_update(state, data, levels, pen, m);
      if (u.skipped) ++skipped;
      change = std::max(change, std::abs(state.beta[m] - before));
      audit_step();
    }

    // Resynchronize the incrementally maintained residuals.
    state.residuals = residuals(data, state.intercepts, state.beta);
    state.objective = state_objective(state, levels, pen);
    if (audit) {
      if (state.objective > audited + 1e-12 * (1.0 + std::abs(audited)))
        ++result.diagnostics.monotonicity_violations;
      audited = state.objective;
    }

    if (change < opts.tol) {
      const int moves = FaceWalk(state, data, levels, pen).run(opts.max_iter);
      if (moves > 0) {
        result.diagnostics.vertex_escapes += moves;
        audit_step();
        continue;
      }
      result.converged = true;
      break;
    }
  }

  result.diagnostics.skipped_coordinates = skipped;
  result.intercepts = state.intercepts;
  result.coefficients = state.beta;
  result.objective = objective(data, state.intercepts, state.beta, levels, penalty);
  return result;
}

}  // namespace cqr
