#include "cqr/simlab.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "cqr/pipeline.hpp"

namespace cqr {

namespace {

// Independent streams per (seed, purpose).
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

constexpr std::uint64_t kTruthStream = 1;
constexpr std::uint64_t kDataStream = 2;

}  // namespace

void SimConfig::validate() const {
  if (n < 1 || p < 1) fail(ErrorKind::Config, "simulation needs n >= 1 and p >= 1");
  if (true_support_size < 0 || true_support_size > p)
    fail(ErrorKind::Config, "true support size must lie in [0, p]");
  if (reps < 1) fail(ErrorKind::Config, "reps must be positive");
  if (algorithms.empty()) fail(ErrorKind::Config, "at least one algorithm required");
  if (lambda && !(*lambda > 0.0)) fail(ErrorKind::Config, "lambda must be positive");
  if (!(selection_threshold >= 0.0)) fail(ErrorKind::Config, "selection threshold must be nonnegative");
  options.validate();
}

double SimConfig::effective_lambda() const {
  if (lambda) return *lambda;
  return std::sqrt(static_cast<double>(n) * std::log(static_cast<double>(std::max<Index>(p, 2)))) / 4.0;
}

VectorXd generate_truth(Index p, Index support, std::uint64_t seed) {
  if (support < 0 || support > p) fail(ErrorKind::Config, "support size must lie in [0, p]");
  auto rng = make_rng(seed, kTruthStream);
  VectorXd beta = VectorXd::Zero(p);
  if (support == p) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (Index j = 0; j < p; ++j) beta[j] = unif(rng);
    return beta;
  }
  std::vector<Index> pos(static_cast<size_t>(p));
  std::iota(pos.begin(), pos.end(), Index{0});
  for (Index i = 0; i < support; ++i) {
    std::uniform_int_distribution<Index> pick(i, p - 1);
    std::swap(pos[static_cast<size_t>(i)], pos[static_cast<size_t>(pick(rng))]);
  }
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  std::bernoulli_distribution negative(0.5);
  for (Index i = 0; i < support; ++i) {
    const double m = mag(rng);
    beta[pos[static_cast<size_t>(i)]] = negative(rng) ? -m : m;
  }
  return beta;
}

Dataset generate_data(Index n, Index p, const VectorXd& truth, double intercept,
                      std::uint64_t seed) {
  if (truth.size() != p) fail(ErrorKind::Config, "truth length must equal p");
  auto rng = make_rng(seed, kDataStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) x(i, j) = normal(rng);
  VectorXd y = x * truth;
  for (Index i = 0; i < n; ++i) y[i] += intercept + normal(rng);
  return Dataset(std::move(x), std::move(y));
}

double coefficient_error(const VectorXd& estimate, const VectorXd& truth) {
  if (estimate.size() != truth.size())
    fail(ErrorKind::Config, "coefficient_error: length mismatch");
  if (truth.size() == 0) return 0.0;
  return (estimate - truth).cwiseAbs().mean();
}

SelectionCounts selection_counts(const VectorXd& estimate, const VectorXd& truth,
                                 double threshold) {
  if (estimate.size() != truth.size())
    fail(ErrorKind::Config, "selection_counts: length mismatch");
  SelectionCounts c;
  for (Index j = 0; j < truth.size(); ++j) {
    if (!(std::abs(estimate[j]) > threshold)) continue;
    if (truth[j] != 0.0) ++c.n_true;
    else ++c.n_false;
  }
  return c;
}

SimReport run_experiment(const SimConfig& config, const FitObserver& observer) {
  config.validate();
  SimReport report;
  report.preset = config.preset;
  report.levels = config.levels.values();
  report.regularized = config.regularized;
  if (config.regularized) {
    report.lambda = config.effective_lambda();
    report.lambda_defaulted = !config.lambda.has_value();
  }
  report.true_support_size = config.true_support_size;
  report.base_seed = config.base_seed;
  report.intercept = config.intercept;

  struct Acc {
    double error = 0, nt = 0, nf = 0, seconds = 0;
    int ok = 0, failed = 0;
  };
  std::vector<Acc> acc(config.algorithms.size());

  for (int rep = 0; rep < config.reps; ++rep) {
    const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(rep);
    const VectorXd truth = generate_truth(config.p, config.true_support_size, seed);
    const Dataset data = generate_data(config.n, config.p, truth, config.intercept, seed);
    for (size_t a = 0; a < config.algorithms.size(); ++a) {
      FitRequest req{data, config.levels, config.regularized,
                     config.regularized ? config.effective_lambda() : 0.0, config.options, {}};
      req.options.algorithm = config.algorithms[a];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const FitResult res = fit(req);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (observer) observer(rep, config.algorithms[a], res);
        if (!res.converged) {
          ++acc[a].failed;
          continue;
        }
        const SelectionCounts sc =
            selection_counts(res.coefficients, truth, config.selection_threshold);
        acc[a].error += coefficient_error(res.coefficients, truth);
        acc[a].nt += sc.n_true;
        acc[a].nf += sc.n_false;
        acc[a].seconds += secs;
        ++acc[a].ok;
      } catch (const Error&) {
        ++acc[a].failed;
      }
    }
  }

  for (size_t a = 0; a < config.algorithms.size(); ++a) {
    SimRow row;
    row.n = config.n;
    row.p = config.p;
    row.algorithm = config.algorithms[a];
    row.reps = config.reps;
    row.failures = acc[a].failed;
    row.flagged = acc[a].failed * 5 > config.reps;
    if (acc[a].ok > 0) {
      const double k = acc[a].ok;
      row.mean_error = acc[a].error / k;
      row.mean_n_true = acc[a].nt / k;
      row.mean_n_false = acc[a].nf / k;
      row.mean_seconds = acc[a].seconds / k;
    } else {
      row.mean_error = row.mean_n_true = row.mean_n_false = row.mean_seconds =
          std::numeric_limits<double>::quiet_NaN();
    }
    report.rows.push_back(row);
  }
  return report;
}

SimConfig preset_config(const std::string& name, Index n, Index p) {
  SimConfig c;
  c.n = n;
  c.p = p;
  c.preset = name;
  const QuantileLevels nine{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  if (name == "qr-noreg") {
    c.levels = QuantileLevels{0.3};
    c.true_support_size = p;
    c.reps = 50;
  } else if (name == "cqr-noreg") {
    c.levels = nine;
    c.true_support_size = p;
    c.reps = 50;
  } else if (name == "qr-reg") {
    c.levels = QuantileLevels{0.3};
    c.true_support_size = std::min<Index>(4, p);
    c.regularized = true;
    c.reps = 25;
  } else if (name == "cqr-reg") {
    c.levels = nine;
    c.true_support_size = std::min<Index>(4, p);
    c.regularized = true;
    c.reps = 25;
  } else {
    fail(ErrorKind::Config, "unknown preset '" + name + "'");
  }
  return c;
}

}  // namespace cqr
