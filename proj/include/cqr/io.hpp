#pragma once

// File formats: CSV input tables, fit result documents and simulation reports.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cqr/core.hpp"
#include "cqr/pipeline.hpp"
#include "cqr/simlab.hpp"

namespace cqr::io {

inline constexpr std::string_view kSchemaVersion = "1.0";

/// Response column, by header name or zero-based position.
using ColumnRef = std::variant<std::string, Index>;

struct Table {
  Dataset data;
  std::string response;
  std::vector<std::string> covariates;  // header order, response removed
};

/// One header row, comma separated, period decimals regardless of locale.
/// Errors carry the 1-based line and column of the offending cell.
Table parse_csv(std::string_view text, const ColumnRef& response);
Table read_csv(const std::filesystem::path& path, const ColumnRef& response);

struct ResultDocument {
  std::string schema_version{kSchemaVersion};
  Algorithm algorithm = Algorithm::Admm;
  std::vector<double> levels;
  bool regularized = false;
  std::optional<double> lambda;
  SolverOptions options;
  std::vector<std::string> covariates;  // may be empty
  VectorXd intercepts;
  VectorXd coefficients;
  int iterations = 0;
  bool converged = false;
  double objective = 0.0;
  std::optional<VectorXd> pilot;

  static ResultDocument from(const FitRequest& request, const FitResult& result);
  bool operator==(const ResultDocument&) const;
};

std::string to_json(const ResultDocument& doc);
ResultDocument result_from_json(std::string_view text);
/// Two columns, name and value; vectors expand to name[i] rows.
std::string to_csv(const ResultDocument& doc);

std::string to_json(const SimReport& report);
SimReport report_from_json(std::string_view text);
/// '#'-prefixed metadata lines, then
/// n,p,algorithm,mean_error,mean_N_T,mean_N_F,mean_seconds,reps
std::string to_csv(const SimReport& report);
SimReport report_from_csv(std::string_view text);

/// Shortest representation that parses back to the same double.
std::string format_double(double v);
/// Locale-independent; the whole string must be consumed.
std::optional<double> parse_double(std::string_view s);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace cqr::io
