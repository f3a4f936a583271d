#include "cqr/pipeline.hpp"

#include <cmath>

#include "cqr/admm.hpp"
#include "cqr/cd.hpp"
#include "cqr/ip.hpp"
#include "cqr/mm.hpp"

namespace cqr {

FitResult solve(Algorithm algorithm, const Dataset& data,
                const QuantileLevels& levels, const PenaltySpec& penalty,
                const SolverOptions& opts) {
  switch (algorithm) {
    case Algorithm::Admm: return fit_admm(data, levels, penalty, opts);
    case Algorithm::Mm: return fit_mm(data, levels, penalty, opts);
    case Algorithm::Cd: return fit_cd(data, levels, penalty, opts);
    case Algorithm::Ip: return fit_ip(data, levels, penalty, opts);
  }
  fail(ErrorKind::Config, "unknown algorithm");
}

FitResult fit(const FitRequest& request) {
  const SolverOptions& opts = request.options;
  opts.validate();
  if (!request.regularized)
    return solve(opts.algorithm, request.data, request.levels, PenaltySpec::none(), opts);

  if (!(request.lambda > 0.0) || !std::isfinite(request.lambda))
    fail(ErrorKind::Config, "regularized fit requires a finite lambda > 0");

  const Algorithm pilot_algo = request.pilot_algorithm.value_or(opts.algorithm);
  SolverOptions pilot_opts = opts;
  pilot_opts.algorithm = pilot_algo;
  const FitResult pilot =
      solve(pilot_algo, request.data, request.levels, PenaltySpec::none(), pilot_opts);
  if (!pilot.converged)
    fail(ErrorKind::Convergence,
         "pilot stage (" + std::string(to_string(pilot_algo)) + ", unpenalized) did not converge in " +
             std::to_string(pilot.iterations) + " iterations");

  const PenaltySpec penalty = PenaltySpec::adaptive_lasso(request.lambda, pilot.coefficients);
  FitResult result = solve(opts.algorithm, request.data, request.levels, penalty, opts);
  result.diagnostics.pilot = pilot.coefficients;
  result.diagnostics.pilot_descent_violations = pilot.diagnostics.descent_violations;
  result.diagnostics.pilot_monotonicity_violations = pilot.diagnostics.monotonicity_violations;
  result.diagnostics.pilot_admm = pilot.diagnostics.admm;
  return result;
}

}  // namespace cqr
