#include "doctest.h"

#include <random>

#include "cqr/cd.hpp"
#include "cqr/ip.hpp"
#include "cqr/mm.hpp"
#include "support.hpp"

using namespace cqr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LinearProgram one_row(std::initializer_list<double> coeffs, double lo, double hi) {
  const auto nv = static_cast<Index>(coeffs.size());
  LinearProgram lp;
  lp.c = VectorXd::Zero(nv);
  lp.a.resize(1, nv);
  Index j = 0;
  for (double v : coeffs) lp.a.insert(0, j++) = v;
  lp.lc = VectorXd::Constant(1, lo);
  lp.uc = VectorXd::Constant(1, hi);
  lp.lx = VectorXd::Constant(nv, -kInf);
  lp.ux = VectorXd::Constant(nv, kInf);
  return lp;
}

}  // namespace

TEST_CASE("solve_lp examples") {
  SUBCASE("bound-active optimum") {
    LinearProgram lp = one_row({1.0}, -kInf, kInf);
    lp.c << 1.0;
    lp.lx << 1.0;
    const LpSolution s = solve_lp(lp, SolverOptions{});
    CHECK(s.status == LpStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.objective == doctest::Approx(1.0).epsilon(1e-8));
  }
  SUBCASE("one-sided slack") {
    LinearProgram lp = one_row({1.0, -1.0}, 3.0, 3.0);
    lp.c << 1.0, 1.0;
    lp.lx.setZero();
    const LpSolution s = solve_lp(lp, SolverOptions{});
    CHECK(s.status == LpStatus::Optimal);
    CHECK(s.x[0] == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(std::abs(s.x[1]) < 1e-8);
  }
  SUBCASE("unbounded") {
    LinearProgram lp = one_row({1.0}, -kInf, kInf);
    lp.c << 1.0;
    CHECK(solve_lp(lp, SolverOptions{}).status == LpStatus::Unbounded);
  }
  SUBCASE("infeasible") {
    LinearProgram lp = one_row({1.0}, 2.0, 2.0);
    lp.c << 1.0;
    lp.ux << 1.0;
    CHECK(solve_lp(lp, SolverOptions{}).status == LpStatus::Infeasible);
  }
}

TEST_CASE("QR LP for a median matches a scan of the order statistics") {
  std::mt19937_64 rng(109);
  std::normal_distribution<double> g(0, 1);
  VectorXd y(5);
  for (Index i = 0; i < 5; ++i) y[i] = g(rng);
  const Dataset d(MatrixXd(5, 0), y);
  const QrLinearProgram q = build_qr_lp(d, QuantileLevels{0.5}, PenaltySpec::none());
  const LpSolution s = solve_lp(q.lp, SolverOptions{});
  const std::vector<double> v(y.data(), y.data() + 5);
  CHECK(s.objective == doctest::Approx(oracle::quantile_loss_min(v, 0.5)).epsilon(1e-9));
}

TEST_CASE("build_qr_lp dimensions") {
  auto rows_equal = [](const LinearProgram& lp) {
    int eq = 0;
    for (Index i = 0; i < lp.num_rows(); ++i) eq += lp.lc[i] == lp.uc[i];
    return eq;
  };
  MatrixXd x(2, 1);
  x << 1, 2;
  const Dataset d(x, (VectorXd(2) << 1, 3).finished());
  const QrLinearProgram a = build_qr_lp(d, QuantileLevels{0.5}, PenaltySpec::none());
  CHECK(a.lp.num_vars() == 6);
  CHECK(a.lp.num_rows() == 2);
  CHECK(rows_equal(a.lp) == 2);

  const QrLinearProgram b = build_qr_lp(d, QuantileLevels{0.2, 0.5, 0.8}, PenaltySpec::none());
  CHECK(b.lp.num_vars() == 3 + 1 + 3 * 2 * 2);
  CHECK(rows_equal(b.lp) == 3 * 2);

  MatrixXd x2(3, 2);
  x2 << 1, 0, 0, 1, 1, 1;
  const Dataset d2(x2, (VectorXd(3) << 1, 2, 3).finished());
  const QrLinearProgram c =
      build_qr_lp(d2, QuantileLevels{0.5}, PenaltySpec::adaptive_lasso(0.1, VectorXd::Ones(2)));
  const QrLinearProgram c0 = build_qr_lp(d2, QuantileLevels{0.5}, PenaltySpec::none());
  CHECK(c.lp.num_vars() == c0.lp.num_vars() + 2);
  CHECK(c.lp.num_rows() == c0.lp.num_rows() + 4);
}

TEST_CASE("fit_ip examples") {
  SUBCASE("median") {
    const VectorXd y = (VectorXd(5) << 4, 1, 3, 5, 2).finished();
    const FitResult r = fit_ip(Dataset(MatrixXd(5, 0), y), QuantileLevels{0.5}, PenaltySpec::none(), SolverOptions{});
    CHECK(std::abs(r.intercepts[0] - 3.0) <= 1e-6);
  }
  SUBCASE("exact line") {
    MatrixXd x(15, 1);
    VectorXd y(15);
    for (Index i = 0; i < 15; ++i) x(i, 0) = i * 0.5, y[i] = 1 - 3 * x(i, 0);
    const FitResult r = fit_ip(Dataset(x, y), QuantileLevels{0.3}, PenaltySpec::none(), SolverOptions{});
    CHECK(r.objective <= 1e-8);
  }
  SUBCASE("exhaustive interpolation oracle") {
    std::mt19937_64 rng(113);
    const auto inst = oracle::gaussian_instance(25, 3, rng);
    const double exact = oracle::exhaustive_qr_optimum(inst.x, inst.y, 0.3);
    const FitResult r = fit_ip(Dataset(inst.x, inst.y), QuantileLevels{0.3}, PenaltySpec::none(), SolverOptions{});
    CHECK(r.converged);
    CHECK(std::abs(r.objective - exact) <= 1e-6);
  }
}

TEST_CASE("IP: strong duality, lower bound and vertex property") {
  std::mt19937_64 rng(127);
  for (int trial = 0; trial < 12; ++trial) {
    const Index n = 30 + 7 * trial, p = 1 + trial % 4;
    const auto inst = oracle::gaussian_instance(n, p, rng);
    const Dataset d(inst.x, inst.y);
    const QuantileLevels lv = trial % 3 ? QuantileLevels{0.25} : QuantileLevels{0.3, 0.6};
    PenaltySpec spec = PenaltySpec::none();
    if (trial % 2) spec = PenaltySpec::adaptive_lasso(0.8, fit_ip(d, lv, PenaltySpec::none(), SolverOptions{}).coefficients);

    const QrLinearProgram q = build_qr_lp(d, lv, spec);
    const LpSolution s = solve_lp(q.lp, SolverOptions{});
    REQUIRE(s.status == LpStatus::Optimal);
    CHECK(std::abs(s.objective - s.dual_objective) / (1 + std::abs(s.objective)) <= 1e-8);

    const FitResult ip = fit_ip(d, lv, spec, SolverOptions{});
    for (const FitResult& other : {fit_cd(d, lv, spec, SolverOptions{}), fit_mm(d, lv, spec, SolverOptions{})})
      CHECK(ip.objective <= other.objective + 1e-8);

    if (lv.size() == 1 && !spec.enabled()) {
      const MatrixXd r = residuals(d, ip.intercepts, ip.coefficients);
      int zeros = 0;
      for (Index i = 0; i < n; ++i) zeros += std::abs(r(i, 0)) <= 1e-6;
      CHECK(zeros >= p + 1);
    }
  }
}

TEST_CASE("IP handles more covariates than observations") {
  std::mt19937_64 rng(131);
  const auto inst = oracle::gaussian_instance(20, 40, rng);
  const Dataset d(inst.x, inst.y);
  const FitResult free_fit = fit_ip(d, QuantileLevels{0.3}, PenaltySpec::none(), SolverOptions{});
  CHECK(free_fit.converged);
  CHECK(free_fit.objective <= 1e-8);
  const FitResult pen = fit_ip(d, QuantileLevels{0.3}, PenaltySpec::adaptive_lasso(2.0, free_fit.coefficients),
                               SolverOptions{});
  CHECK(pen.converged);
  const FitResult cd = fit_cd(d, QuantileLevels{0.3}, PenaltySpec::adaptive_lasso(2.0, free_fit.coefficients),
                              SolverOptions{});
  CHECK(pen.objective <= cd.objective + 1e-8);
}
