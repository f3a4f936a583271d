#pragma once

// Domain types and the numerical primitives shared by every solver.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cqr/error.hpp"

namespace cqr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Pilot coefficients smaller than this in magnitude exclude their variable.
inline constexpr double kPilotFloor = 1e-6;

enum class Algorithm { Admm, Mm, Cd, Ip };

std::string_view to_string(Algorithm a);
/// Accepts "admm", "mm", "cd", "ip" (case-insensitive).
Algorithm parse_algorithm(std::string_view name);

/// Design matrix (no intercept column) and response. Validated on construction.
class Dataset {
 public:
  Dataset(MatrixXd x, VectorXd y);

  const MatrixXd& x() const noexcept { return x_; }
  const VectorXd& y() const noexcept { return y_; }
  Index n() const noexcept { return y_.size(); }
  Index p() const noexcept { return x_.cols(); }

 private:
  MatrixXd x_;
  VectorXd y_;
};

/// Strictly increasing levels in (0,1). One level is plain quantile regression.
class QuantileLevels {
 public:
  explicit QuantileLevels(std::vector<double> levels);
  QuantileLevels(std::initializer_list<double> levels)
      : QuantileLevels(std::vector<double>(levels)) {}

  Index size() const noexcept { return static_cast<Index>(levels_.size()); }
  double operator[](Index k) const { return levels_[static_cast<size_t>(k)]; }
  const std::vector<double>& values() const noexcept { return levels_; }

 private:
  std::vector<double> levels_;
};

enum class PenaltyKind { None, AdaptiveLasso };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::None;
  double lambda = 0.0;
  std::optional<VectorXd> pilot;

  static PenaltySpec none() { return {}; }
  static PenaltySpec adaptive_lasso(double lambda,
                                    std::optional<VectorXd> pilot = {});

  bool enabled() const noexcept { return kind == PenaltyKind::AdaptiveLasso; }
  /// Throws Config when the spec is unusable for p covariates.
  void validate(Index p) const;
};

struct SolverOptions {
  Algorithm algorithm = Algorithm::Admm;
  int max_iter = 5000;
  double tol = 1e-4;
  double rho = 1.2;
  double eps_mm = 1e-4;
  double eps_abs = 1e-2;
  double eps_rel = 1e-4;
  double selection_threshold = 1e-3;
  /// Record per-update objective traces (MM, CD) for invariant audits.
  bool record_trace = false;

  void validate() const;
};

/// Final ADMM iterate, kept so the stopping rule can be re-checked.
struct AdmmSnapshot {
  VectorXd beta;  // stacked: intercepts then covariates
  VectorXd r;
  VectorXd r_prev;
  VectorXd u;
  bool regularized = false;
  double primal_norm = 0.0;
  double dual_norm = 0.0;
  double eps_primal = 0.0;
  double eps_dual = 0.0;
};

struct FitDiagnostics {
  bool ridge_fallback = false;
  int skipped_coordinates = 0;
  int descent_violations = 0;       // MM
  int monotonicity_violations = 0;  // CD (audited when record_trace)
  int vertex_escapes = 0;           // CD edge moves out of coordinatewise minima
  int pilot_descent_violations = 0;       // same counters for the pilot stage
  int pilot_monotonicity_violations = 0;
  std::vector<double> objective_trace;
  std::optional<AdmmSnapshot> admm;
  std::optional<AdmmSnapshot> pilot_admm;
  std::optional<VectorXd> pilot;
  std::string note;
};

struct FitResult {
  VectorXd intercepts;
  VectorXd coefficients;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  Algorithm algorithm = Algorithm::Admm;
  FitDiagnostics diagnostics;
};

/// Stacked composite design: intercept indicator block first, then X per level.
struct CompositeDesign {
  MatrixXd xs;
  VectorXd ys;
  VectorXd taus;
  Index n = 0;
  Index k = 0;
};

struct AdaptiveWeights {
  VectorXd weights;
  std::vector<bool> active;
};

/// Penalty with weights resolved from the pilot; what the solvers consume.
struct ResolvedPenalty {
  bool enabled = false;
  double lambda = 0.0;
  VectorXd weights;
  std::vector<bool> active;

  static ResolvedPenalty from(const PenaltySpec& spec, Index p);
  /// lambda * sum_j weights_j |beta_j|; +inf if an inactive coefficient is nonzero.
  double value(const VectorXd& beta) const;
};

namespace detail {
inline double check_loss_unchecked(double t, double tau) noexcept {
  return t >= 0.0 ? tau * t : (tau - 1.0) * t;
}
}  // namespace detail

double check_loss(double t, double tau);

double objective(const Dataset& data, const VectorXd& intercepts,
                 const VectorXd& beta, const QuantileLevels& levels,
                 const PenaltySpec& penalty);

/// Componentwise (v_i - a)_+ - (-v_i - a)_+.
VectorXd soft_threshold(const VectorXd& v, double a);

inline double soft_threshold(double v, double a) noexcept {
  if (v > a) return v - a;
  if (v < -a) return v + a;
  return 0.0;
}

/// Smallest order statistic whose cumulative weight reaches half the total.
/// Ties in z are broken by original position.
double weighted_median(std::span<const double> z, std::span<const double> w);

/// Lower empirical quantile v_(ceil(n tau)).
double sample_quantile(std::span<const double> values, double tau);

CompositeDesign stack_composite(const Dataset& data,
                                const QuantileLevels& levels);

AdaptiveWeights adaptive_weights(const VectorXd& pilot,
                                 double floor = kPilotFloor);

/// Residual matrix r(i,k) = y_i - b_k - x_i' beta.
MatrixXd residuals(const Dataset& data, const VectorXd& intercepts,
                   const VectorXd& beta);

}  // namespace cqr
