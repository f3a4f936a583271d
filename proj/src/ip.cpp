#include "cqr/ip.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "linalg.hpp"

namespace cqr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLpTol = 1e-8;
constexpr double kStepFraction = 0.9995;
constexpr double kDivergence = 1e12;

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

// Standard form: min c'x s.t. A x = b, x_j >= 0 unless free[j].
struct StandardForm {
  SpMat a;
  VectorXd b;
  VectorXd c;
  double c0 = 0.0;
  std::vector<bool> free;
};

// x_original = offset + sign * x_standard[col]  (col < 0: fixed at offset)
struct VarRecord {
  Index col = -1;
  double offset = 0.0;
  double sign = 1.0;
};

struct Reduction {
  StandardForm form;
  std::vector<VarRecord> vars;  // original variables then row slacks
  std::vector<Index> row_of;    // original row -> standard row (-1: dropped)
};

Reduction reduce(const LinearProgram& lp) {
  const Index nvar = lp.num_vars();
  const Index nrow = lp.num_rows();

  // Extended variables: originals, then one slack per non-equality row.
  struct Ext {
    double cost, lo, hi;
    std::vector<std::pair<Index, double>> entries;  // (row, value)
  };
  std::vector<Ext> ext(static_cast<size_t>(nvar));
  for (Index j = 0; j < nvar; ++j) {
    ext[static_cast<size_t>(j)] = {lp.c[j], lp.lx[j], lp.ux[j], {}};
    for (SpMat::InnerIterator it(lp.a, j); it; ++it)
      ext[static_cast<size_t>(j)].entries.emplace_back(it.row(), it.value());
  }

  Reduction red;
  red.row_of.assign(static_cast<size_t>(nrow), -1);
  std::vector<double> rhs;
  Index m = 0;
  for (Index i = 0; i < nrow; ++i) {
    const double lo = lp.lc[i];
    const double hi = lp.uc[i];
    if (lo == -kInf && hi == kInf) continue;
    red.row_of[static_cast<size_t>(i)] = m;
    if (lo == hi) {
      rhs.push_back(lo);
    } else {
      rhs.push_back(0.0);
      ext.push_back({0.0, lo, hi, {{i, -1.0}}});
    }
    ++m;
  }
  // Remap extended entries to reduced rows.
  for (auto& e : ext) {
    std::vector<std::pair<Index, double>> kept;
    for (auto [row, val] : e.entries) {
      const Index r = red.row_of[static_cast<size_t>(row)];
      if (r >= 0) kept.emplace_back(r, val);
    }
    e.entries = std::move(kept);
  }

  std::vector<Triplet> trips;
  std::vector<double> cost;
  std::vector<bool> is_free;
  StandardForm& f = red.form;
  auto add_column = [&](double c, bool fr) {
    cost.push_back(c);
    is_free.push_back(fr);
    return static_cast<Index>(cost.size()) - 1;
  };

  red.vars.resize(ext.size());
  for (size_t e = 0; e < ext.size(); ++e) {
    const Ext& v = ext[e];
    VarRecord rec;
    const bool has_lo = v.lo > -kInf;
    const bool has_hi = v.hi < kInf;
    if (has_lo && has_hi && v.lo == v.hi) {
      rec.offset = v.lo;
    } else if (!has_lo && !has_hi) {
      rec.col = add_column(v.cost, true);
    } else if (has_lo) {
      rec.offset = v.lo;
      rec.col = add_column(v.cost, false);
    } else {
      rec.offset = v.hi;
      rec.sign = -1.0;
      rec.col = add_column(-v.cost, false);
    }
    f.c0 += v.cost * rec.offset;
    for (auto [row, val] : v.entries) {
      rhs[static_cast<size_t>(row)] -= val * rec.offset;
      if (rec.col >= 0) trips.emplace_back(row, rec.col, rec.sign * val);
    }
    if (has_lo && has_hi && v.lo != v.hi) {
      // x - lo + t = hi - lo, t >= 0
      const Index t = add_column(0.0, false);
      trips.emplace_back(m, rec.col, 1.0);
      trips.emplace_back(m, t, 1.0);
      rhs.push_back(v.hi - v.lo);
      ++m;
    }
    red.vars[e] = rec;
  }

  const auto ncol = static_cast<Index>(cost.size());
  f.a.resize(m, ncol);
  f.a.setFromTriplets(trips.begin(), trips.end());
  f.b = Eigen::Map<const VectorXd>(rhs.data(), m);
  f.c = Eigen::Map<const VectorXd>(cost.data(), ncol);
  f.free = std::move(is_free);
  f.c0 += lp.c0;
  return red;
}

double max_step(const VectorXd& v, const VectorXd& dv) {
  double alpha = kInf;
  for (Index i = 0; i < v.size(); ++i)
    if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
  return alpha;
}

double inf_norm(const VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

// Newton systems for the current scaling, factorized once per iteration.
class KktSolver {
 public:
  KktSolver(const SpMat& ab, const MatrixXd& af) : ab_(ab), af_(af) {
    const SpMat pattern = ab_ * ab_.transpose();
    ldlt_.analyzePattern(pattern);
  }

  void factorize(const VectorXd& dinv) {
    dinv_ = dinv;
    SpMat m = ab_ * dinv.asDiagonal() * ab_.transpose();
    ldlt_.factorize(m);
    if (ldlt_.info() != Eigen::Success || (ldlt_.vectorD().array() <= 0.0).any()) {
      double scale = 0.0;
      for (Index i = 0; i < m.rows(); ++i) scale = std::max(scale, m.coeff(i, i));
      SpMat shift(m.rows(), m.cols());
      shift.setIdentity();
      m += (1e-14 * (scale > 0.0 ? scale : 1.0)) * shift;
      ldlt_.factorize(m);
      if (ldlt_.info() != Eigen::Success)
        fail(ErrorKind::Numerical, "interior point: normal matrix factorization failed");
    }
    if (af_.cols() > 0) {
      w_ = ldlt_.solve(af_);
      schur_.compute(af_.transpose() * w_);
    }
  }

  // Solves A dx = rb, A_B' dy - D dx_B = rt_B, A_F' dy = rt_F, followed by
  // iterative refinement on the first and last blocks (the middle one holds
  // exactly by construction of dx_B).
  void solve(const VectorXd& rb, const VectorXd& rt_b, const VectorXd& rt_f,
             VectorXd& dx_b, VectorXd& dx_f, VectorXd& dy) const {
    solve_once(rb, rt_b, rt_f, dx_b, dx_f, dy);
    const double scale = 1.0 + std::max(inf_norm(rb), inf_norm(rt_f));
    VectorXd cb, cf, cy;
    for (int pass = 0; pass < 3; ++pass) {
      const VectorXd e1 = rb - ab_ * dx_b - af_ * dx_f;
      const VectorXd e3 = af_.cols() > 0 ? VectorXd(rt_f - af_.transpose() * dy) : VectorXd();
      if (std::max(inf_norm(e1), inf_norm(e3)) <= 1e-14 * scale) break;
      solve_once(e1, VectorXd::Zero(rt_b.size()), e3.size() ? e3 : VectorXd::Zero(0), cb, cf, cy);
      dx_b += cb;
      dx_f += cf;
      dy += cy;
    }
  }

 private:
  void solve_once(const VectorXd& rb, const VectorXd& rt_b, const VectorXd& rt_f,
                  VectorXd& dx_b, VectorXd& dx_f, VectorXd& dy) const {
    const VectorXd g = rb + ab_ * dinv_.cwiseProduct(rt_b);
    const VectorXd mg = ldlt_.solve(g);
    if (af_.cols() > 0) {
      dx_f = schur_.solve(af_.transpose() * mg - rt_f);
      dy = mg - w_ * dx_f;
    } else {
      dx_f.resize(0);
      dy = mg;
    }
    dx_b = dinv_.cwiseProduct(ab_.transpose() * dy - rt_b);
  }

  const SpMat& ab_;
  const MatrixXd& af_;
  Eigen::SimplicialLDLT<SpMat> ldlt_;
  VectorXd dinv_;
  MatrixXd w_;
  detail::SpdFactor schur_;
};

}  // namespace

void LinearProgram::validate() const {
  const Index n = c.size();
  const Index m = a.rows();
  if (a.cols() != n || lx.size() != n || ux.size() != n || lc.size() != m || uc.size() != m)
    fail(ErrorKind::Config, "linear program: inconsistent dimensions");
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lx[j]) || std::isnan(ux[j]) || lx[j] > ux[j] || lx[j] == kInf || ux[j] == -kInf)
      fail(ErrorKind::Config, "linear program: invalid variable bounds");
    if (!std::isfinite(c[j])) fail(ErrorKind::Domain, "linear program: non-finite cost");
  }
  for (Index i = 0; i < m; ++i)
    if (std::isnan(lc[i]) || std::isnan(uc[i]) || lc[i] > uc[i] || lc[i] == kInf || uc[i] == -kInf)
      fail(ErrorKind::Config, "linear program: invalid constraint bounds");
}

std::string_view to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::MaxIter: return "max_iter";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
  }
  return "unknown";
}

LpSolution solve_lp(const LinearProgram& lp, const SolverOptions& opts) {
  lp.validate();
  const Reduction red = reduce(lp);
  const StandardForm& sf = red.form;
  const Index m = sf.a.rows();
  const Index ncol = sf.a.cols();

  std::vector<Index> bcols, fcols;
  for (Index j = 0; j < ncol; ++j) (sf.free[static_cast<size_t>(j)] ? fcols : bcols).push_back(j);
  const auto nb = static_cast<Index>(bcols.size());
  const auto nf = static_cast<Index>(fcols.size());

  SpMat ab(m, nb);
  {
    std::vector<Triplet> t;
    for (Index c = 0; c < nb; ++c)
      for (SpMat::InnerIterator it(sf.a, bcols[static_cast<size_t>(c)]); it; ++it)
        t.emplace_back(it.row(), c, it.value());
    ab.setFromTriplets(t.begin(), t.end());
  }
  MatrixXd af = MatrixXd::Zero(m, nf);
  for (Index c = 0; c < nf; ++c)
    for (SpMat::InnerIterator it(sf.a, fcols[static_cast<size_t>(c)]); it; ++it)
      af(it.row(), c) = it.value();
  VectorXd cb(nb), cf(nf);
  for (Index c = 0; c < nb; ++c) cb[c] = sf.c[bcols[static_cast<size_t>(c)]];
  for (Index c = 0; c < nf; ++c) cf[c] = sf.c[fcols[static_cast<size_t>(c)]];

  // Free columns that are linearly dependent leave the free block
  // undetermined. Restrict it to the row space of A_F, which selects the
  // minimum-norm free part among equivalent solutions.
  MatrixXd free_basis;
  if (nf > 0) {
    Index rank = 0;
    free_basis = MatrixXd::Zero(nf, 0);
    if (m > 0) {
      const Eigen::ColPivHouseholderQR<MatrixXd> qr(af.transpose());
      rank = qr.rank();
      if (rank > 0) free_basis = qr.householderQ() * MatrixXd::Identity(nf, rank);
    }
    if (rank < nf) {
      const VectorXd leak = cf - free_basis * (free_basis.transpose() * cf);
      if (inf_norm(leak) > 1e-12 * (1.0 + inf_norm(cf))) {
        LpSolution sol;
        sol.status = LpStatus::Unbounded;
        sol.x = VectorXd::Constant(lp.num_vars(), std::numeric_limits<double>::quiet_NaN());
        sol.dual = VectorXd::Zero(lp.num_rows());
        sol.objective = -kInf;
        return sol;
      }
      af = af * free_basis;
      cf = free_basis.transpose() * cf;
    } else {
      free_basis.resize(0, 0);
    }
  }
  const Index nw = af.cols();

  KktSolver kkt(ab, af);
  VectorXd xb(nb), xf(nw), y(m), zb(nb);
  VectorXd dxb, dxf, dy;

  // Starting point: least-norm primal and least-squares dual, then shifted
  // into the positive orthant.
  kkt.factorize(VectorXd::Ones(nb));
  kkt.solve(sf.b, VectorXd::Zero(nb), VectorXd::Zero(nw), dxb, dxf, dy);
  xb = dxb;
  xf = dxf;
  kkt.solve(VectorXd::Zero(m), cb, cf, dxb, dxf, dy);
  y = dy;
  zb = -dxb;
  if (nb > 0) {
    xb.array() += std::max(-1.5 * xb.minCoeff(), 0.0);
    zb.array() += std::max(-1.5 * zb.minCoeff(), 0.0);
    const double prod = xb.dot(zb);
    const double xs = xb.sum();
    const double zs = zb.sum();
    xb.array() += zs > 0.0 ? 0.5 * prod / zs : 0.0;
    zb.array() += xs > 0.0 ? 0.5 * prod / xs : 0.0;
    for (Index i = 0; i < nb; ++i) {
      if (!(xb[i] > 0.0)) xb[i] = 1.0;
      if (!(zb[i] > 0.0)) zb[i] = 1.0;
    }
  }

  const double bnorm = inf_norm(sf.b);
  const double cnorm = std::max(inf_norm(cb), inf_norm(cf));

  LpSolution sol;
  sol.status = LpStatus::MaxIter;
  int stalled = 0;
  for (int it = 0; it <= opts.max_iter; ++it) {
    sol.iterations = it;
    const VectorXd rb = sf.b - ab * xb - af * xf;
    const VectorXd rcb = cb - ab.transpose() * y - zb;
    const VectorXd rcf = cf - af.transpose() * y;
    const double pobj = cb.dot(xb) + cf.dot(xf) + sf.c0;
    const double dobj = sf.b.dot(y) + sf.c0;
    sol.primal_residual = inf_norm(rb) / (1.0 + bnorm);
    sol.dual_residual = std::max(inf_norm(rcb), inf_norm(rcf)) / (1.0 + cnorm);
    sol.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj));
    sol.objective = pobj;
    sol.dual_objective = dobj;
    if (sol.primal_residual <= kLpTol && sol.dual_residual <= kLpTol && sol.gap <= kLpTol) {
      sol.status = LpStatus::Optimal;
      break;
    }
    if (std::max(inf_norm(xb), inf_norm(xf)) > kDivergence * (1.0 + bnorm)) {
      sol.status = LpStatus::Unbounded;
      break;
    }
    if (std::max(inf_norm(y), inf_norm(zb)) > kDivergence * (1.0 + cnorm)) {
      sol.status = LpStatus::Infeasible;
      break;
    }
    if (it == opts.max_iter) break;

    const double mu = nb > 0 ? xb.dot(zb) / static_cast<double>(nb) : 0.0;
    kkt.factorize(xb.cwiseQuotient(zb));

    // Predictor (affine scaling).
    VectorXd rmu = -xb.cwiseProduct(zb);
    kkt.solve(rb, rcb - rmu.cwiseQuotient(xb), rcf, dxb, dxf, dy);
    VectorXd dzb = (rmu - zb.cwiseProduct(dxb)).cwiseQuotient(xb);
    const double ap_aff = std::min(1.0, max_step(xb, dxb));
    const double ad_aff = std::min(1.0, max_step(zb, dzb));
    double sigma = 0.0;
    if (nb > 0 && mu > 0.0) {
      const double mu_aff = (xb + ap_aff * dxb).dot(zb + ad_aff * dzb) / static_cast<double>(nb);
      sigma = std::pow(std::max(mu_aff, 0.0) / mu, 3.0);
    }

    // Corrector with centering.
    rmu = VectorXd::Constant(nb, sigma * mu) - xb.cwiseProduct(zb) - dxb.cwiseProduct(dzb);
    kkt.solve(rb, rcb - rmu.cwiseQuotient(xb), rcf, dxb, dxf, dy);
    dzb = (rmu - zb.cwiseProduct(dxb)).cwiseQuotient(xb);
    const double ap = std::min(1.0, kStepFraction * max_step(xb, dxb));
    const double ad = std::min(1.0, kStepFraction * max_step(zb, dzb));
    if (!dxb.allFinite() || !dy.allFinite() || !dxf.allFinite())
      fail(ErrorKind::Numerical, "interior point: non-finite search direction");

    xb += ap * dxb;
    xf += ap * dxf;
    y += ad * dy;
    zb += ad * dzb;

    stalled = (ap < 1e-10 && ad < 1e-10) ? stalled + 1 : 0;
    if (stalled >= 5) break;
  }

  // Map back to the caller's variables.
  VectorXd xs(ncol);
  for (Index c = 0; c < nb; ++c) xs[bcols[static_cast<size_t>(c)]] = xb[c];
  const VectorXd xfree = free_basis.rows() > 0 ? VectorXd(free_basis * xf) : xf;
  for (Index c = 0; c < nf; ++c) xs[fcols[static_cast<size_t>(c)]] = xfree[c];
  sol.x.resize(lp.num_vars());
  for (Index j = 0; j < lp.num_vars(); ++j) {
    const VarRecord& rec = red.vars[static_cast<size_t>(j)];
    sol.x[j] = rec.col >= 0 ? rec.offset + rec.sign * xs[rec.col] : rec.offset;
  }
  sol.dual = VectorXd::Zero(lp.num_rows());
  for (Index i = 0; i < lp.num_rows(); ++i) {
    const Index r = red.row_of[static_cast<size_t>(i)];
    if (r >= 0) sol.dual[i] = y[r];
  }
  sol.objective = lp.c.dot(sol.x) + lp.c0;
  return sol;
}

void QrLpLayout::unpack(const VectorXd& x, VectorXd& intercepts, VectorXd& beta) const {
  intercepts.resize(k);
  beta.resize(p);
  for (Index l = 0; l < k; ++l) intercepts[l] = x[intercept(l)];
  for (Index j = 0; j < p; ++j) beta[j] = x[this->beta(j)];
}

QrLinearProgram build_qr_lp(const Dataset& data, const QuantileLevels& levels,
                            const PenaltySpec& penalty) {
  const ResolvedPenalty pen = ResolvedPenalty::from(penalty, data.p());
  QrLinearProgram out;
  QrLpLayout& L = out.layout;
  L.n = data.n();
  L.p = data.p();
  L.k = levels.size();
  L.penalized = pen.enabled;

  LinearProgram& lp = out.lp;
  const Index nv = L.num_vars();
  const Index nr = L.num_rows();
  lp.c = VectorXd::Zero(nv);
  lp.lx = VectorXd::Constant(nv, -kInf);
  lp.ux = VectorXd::Constant(nv, kInf);
  lp.lc.resize(nr);
  lp.uc.resize(nr);

  std::vector<Triplet> t;
  t.reserve(static_cast<size_t>(L.n * L.k * (L.p + 3) + 4 * L.p));
  for (Index l = 0; l < L.k; ++l) {
    const double tau = levels[l];
    for (Index i = 0; i < L.n; ++i) {
      const Index row = l * L.n + i;
      t.emplace_back(row, L.intercept(l), 1.0);
      for (Index j = 0; j < L.p; ++j)
        if (data.x()(i, j) != 0.0) t.emplace_back(row, L.beta(j), data.x()(i, j));
      t.emplace_back(row, L.u(l, i), 1.0);
      t.emplace_back(row, L.v(l, i), -1.0);
      lp.lc[row] = lp.uc[row] = data.y()[i];
      lp.c[L.u(l, i)] = tau;
      lp.c[L.v(l, i)] = 1.0 - tau;
      lp.lx[L.u(l, i)] = 0.0;
      lp.lx[L.v(l, i)] = 0.0;
    }
  }
  if (pen.enabled) {
    // A penalty rate above the largest possible loss slope in beta_j forces
    // beta_j = 0 at every optimum. Fixing those up front keeps huge adaptive
    // weights out of the cost vector.
    double slope_cap = 0.0;
    for (Index l = 0; l < L.k; ++l) slope_cap = std::max(slope_cap, std::max(levels[l], 1.0 - levels[l]));
    const VectorXd loss_slope = slope_cap * static_cast<double>(L.k) * data.x().cwiseAbs().colwise().sum().transpose();
    const Index base = L.n * L.k;
    for (Index j = 0; j < L.p; ++j) {
      const Index star = L.beta_bound(j);
      t.emplace_back(base + 2 * j, L.beta(j), 1.0);
      t.emplace_back(base + 2 * j, star, -1.0);
      t.emplace_back(base + 2 * j + 1, L.beta(j), -1.0);
      t.emplace_back(base + 2 * j + 1, star, -1.0);
      lp.lc[base + 2 * j] = lp.lc[base + 2 * j + 1] = -kInf;
      lp.uc[base + 2 * j] = lp.uc[base + 2 * j + 1] = 0.0;
      lp.lx[star] = 0.0;
      const double rate = pen.lambda * pen.weights[j];
      if (pen.active[static_cast<size_t>(j)] && rate <= loss_slope[j]) {
        lp.c[star] = rate;
      } else {
        lp.lx[L.beta(j)] = lp.ux[L.beta(j)] = 0.0;
        lp.ux[star] = 0.0;
      }
    }
  }
  lp.a.resize(nr, nv);
  lp.a.setFromTriplets(t.begin(), t.end());
  return out;
}

FitResult fit_ip(const Dataset& data, const QuantileLevels& levels,
                 const PenaltySpec& penalty, const SolverOptions& opts) {
  opts.validate();
  const QrLinearProgram qlp = build_qr_lp(data, levels, penalty);
  const LpSolution sol = solve_lp(qlp.lp, opts);
  if (sol.status == LpStatus::Infeasible || sol.status == LpStatus::Unbounded)
    fail(ErrorKind::Numerical,
         "interior point: linear program reported " + std::string(to_string(sol.status)));

  FitResult result;
  result.algorithm = Algorithm::Ip;
  qlp.layout.unpack(sol.x, result.intercepts, result.coefficients);
  result.iterations = sol.iterations;
  result.converged = sol.status == LpStatus::Optimal;
  result.objective = objective(data, result.intercepts, result.coefficients, levels, penalty);
  return result;
}

}  // namespace cqr
