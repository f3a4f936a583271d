#pragma once

#include <Eigen/Dense>

#include "cqr/error.hpp"

namespace cqr::detail {

/// LDLT of a symmetric positive semidefinite matrix. When the factor is
/// numerically rank deficient, 1e-8 * trace / dim is added to the diagonal
/// and `ridged` is set.
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(const Eigen::MatrixXd& m) { compute(m); }

  void compute(const Eigen::MatrixXd& m) {
    ridged_ = false;
    const Eigen::Index dim = m.rows();
    if (dim == 0) {
      ldlt_.compute(m);
      return;
    }
    ldlt_.compute(m);
    if (!usable()) {
      const double trace = m.trace();
      const double ridge = 1e-8 * (trace > 0.0 ? trace : 1.0) / static_cast<double>(dim);
      Eigen::MatrixXd shifted = m;
      shifted.diagonal().array() += ridge;
      ldlt_.compute(shifted);
      ridged_ = true;
      if (!usable())
        fail(ErrorKind::Numerical, "normal equations are not positive definite");
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const { return ldlt_.solve(rhs); }
  bool ridged() const noexcept { return ridged_; }

 private:
  bool usable() const {
    if (ldlt_.info() != Eigen::Success) return false;
    const auto d = ldlt_.vectorD();
    if (d.size() == 0) return true;
    const double dmax = d.maxCoeff();
    const double dmin = d.minCoeff();
    return dmax > 0.0 && dmin > 1e-13 * dmax;
  }

  Eigen::LDLT<Eigen::MatrixXd> ldlt_;
  bool ridged_ = false;
};

}  // namespace cqr::detail
