#include "cqr/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace cqr::io {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return std::string(s);
}

[[noreturn]] void parse_fail(const std::string& what) { fail(ErrorKind::Parse, what); }

json number(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

double number_from(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

json vector_json(const VectorXd& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(number(v[i]));
  return a;
}

VectorXd vector_from(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v[static_cast<Index>(i)] = number_from(j[i]);
  return v;
}

json options_json(const SolverOptions& o) {
  return {{"max_iter", o.max_iter}, {"tol", o.tol},         {"rho", o.rho},
          {"eps_mm", o.eps_mm},     {"eps_abs", o.eps_abs}, {"eps_rel", o.eps_rel},
          {"selection_threshold", o.selection_threshold}};
}

SolverOptions options_from(const json& j, Algorithm algorithm) {
  SolverOptions o;
  o.algorithm = algorithm;
  o.max_iter = j.at("max_iter").get<int>();
  o.tol = j.at("tol").get<double>();
  o.rho = j.at("rho").get<double>();
  o.eps_mm = j.at("eps_mm").get<double>();
  o.eps_abs = j.at("eps_abs").get<double>();
  o.eps_rel = j.at("eps_rel").get<double>();
  o.selection_threshold = j.at("selection_threshold").get<double>();
  return o;
}

// The algorithm travels in the document itself, so options.algorithm is not compared.
bool same_options(const SolverOptions& a, const SolverOptions& b) {
  return a.max_iter == b.max_iter && a.tol == b.tol &&
         a.rho == b.rho && a.eps_mm == b.eps_mm && a.eps_abs == b.eps_abs &&
         a.eps_rel == b.eps_rel && a.selection_threshold == b.selection_threshold;
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    parse_fail(std::string("invalid JSON: ") + e.what());
  }
}

std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

Table parse_csv(std::string_view text, const ColumnRef& response) {
  std::vector<std::string_view> lines;
  {
    size_t start = 0;
    while (start <= text.size()) {
      size_t pos = text.find('\n', start);
      if (pos == std::string_view::npos) pos = text.size();
      lines.push_back(text.substr(start, pos - start));
      start = pos + 1;
    }
  }
  // Drop trailing blank lines only; blank lines inside the table are errors.
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) parse_fail("CSV input is empty");

  std::vector<std::string> header;
  for (auto cell : split(lines[0], ',')) header.push_back(unquote(cell));
  const auto ncol = static_cast<Index>(header.size());

  Index yc = -1;
  if (const auto* name = std::get_if<std::string>(&response)) {
    for (Index c = 0; c < ncol; ++c)
      if (header[static_cast<size_t>(c)] == *name) {
        yc = c;
        break;
      }
    if (yc < 0) parse_fail("response column '" + *name + "' not found in header");
  } else {
    yc = std::get<Index>(response);
    if (yc < 0 || yc >= ncol)
      parse_fail("response column index " + std::to_string(yc) + " outside 0.." +
                 std::to_string(ncol - 1));
  }
  if (ncol < 1) parse_fail("CSV header has no columns");

  const auto nrow = static_cast<Index>(lines.size()) - 1;
  if (nrow < 1) parse_fail("CSV input has a header but no data rows");
  MatrixXd x(nrow, ncol - 1);
  VectorXd y(nrow);
  for (Index r = 0; r < nrow; ++r) {
    const auto line_no = std::to_string(r + 2);
    const auto cells = split(lines[static_cast<size_t>(r + 1)], ',');
    if (static_cast<Index>(cells.size()) != ncol)
      parse_fail("line " + line_no + ": expected " + std::to_string(ncol) + " fields, found " +
                 std::to_string(cells.size()));
    for (Index c = 0, xc = 0; c < ncol; ++c) {
      const auto cell = cells[static_cast<size_t>(c)];
      const auto where = "line " + line_no + ", column " + std::to_string(c + 1) + " ('" +
                         header[static_cast<size_t>(c)] + "')";
      if (cell.empty()) parse_fail(where + ": empty cell");
      const auto v = parse_double(cell);
      if (!v || !std::isfinite(*v)) parse_fail(where + ": not a finite number: '" + std::string(cell) + "'");
      if (c == yc) y[r] = *v;
      else x(r, xc++) = *v;
    }
  }

  std::vector<std::string> covariates;
  for (Index c = 0; c < ncol; ++c)
    if (c != yc) covariates.push_back(header[static_cast<size_t>(c)]);
  return Table{Dataset(std::move(x), std::move(y)), header[static_cast<size_t>(yc)],
               std::move(covariates)};
}

Table read_csv(const std::filesystem::path& path, const ColumnRef& response) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), response);
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail(ErrorKind::Io, "write to '" + path.string() + "' failed");
}

// Result documents

ResultDocument ResultDocument::from(const FitRequest& request, const FitResult& result) {
  ResultDocument d;
  d.algorithm = request.options.algorithm;
  d.levels = request.levels.values();
  d.regularized = request.regularized;
  if (request.regularized) d.lambda = request.lambda;
  d.options = request.options;
  d.options.record_trace = false;
  d.intercepts = result.intercepts;
  d.coefficients = result.coefficients;
  d.iterations = result.iterations;
  d.converged = result.converged;
  d.objective = result.objective;
  d.pilot = result.diagnostics.pilot;
  return d;
}

bool ResultDocument::operator==(const ResultDocument& o) const {
  const bool pilots = pilot.has_value() == o.pilot.has_value() && (!pilot || *pilot == *o.pilot);
  return schema_version == o.schema_version && algorithm == o.algorithm && levels == o.levels &&
         regularized == o.regularized && lambda == o.lambda && same_options(options, o.options) &&
         covariates == o.covariates && intercepts == o.intercepts &&
         coefficients == o.coefficients && iterations == o.iterations &&
         converged == o.converged && objective == o.objective && pilots;
}

std::string to_json(const ResultDocument& doc) {
  json j;
  j["schema_version"] = doc.schema_version;
  j["request"] = {{"algorithm", std::string(to_string(doc.algorithm))},
                  {"levels", doc.levels},
                  {"regularized", doc.regularized},
                  {"lambda", doc.lambda ? json(*doc.lambda) : json(nullptr)},
                  {"options", options_json(doc.options)}};
  if (!doc.covariates.empty()) j["covariates"] = doc.covariates;
  j["intercepts"] = vector_json(doc.intercepts);
  j["coefficients"] = vector_json(doc.coefficients);
  j["iterations"] = doc.iterations;
  j["converged"] = doc.converged;
  j["objective"] = number(doc.objective);
  if (doc.pilot) j["pilot"] = vector_json(*doc.pilot);
  return j.dump(2) + "\n";
}

ResultDocument result_from_json(std::string_view text) {
  const json j = parse_json(text);
  try {
    ResultDocument d;
    d.schema_version = j.at("schema_version").get<std::string>();
    const json& req = j.at("request");
    d.algorithm = parse_algorithm(req.at("algorithm").get<std::string>());
    d.levels = req.at("levels").get<std::vector<double>>();
    d.regularized = req.at("regularized").get<bool>();
    if (!req.at("lambda").is_null()) d.lambda = req.at("lambda").get<double>();
    d.options = options_from(req.at("options"), d.algorithm);
    if (j.contains("covariates")) d.covariates = j.at("covariates").get<std::vector<std::string>>();
    d.intercepts = vector_from(j.at("intercepts"));
    d.coefficients = vector_from(j.at("coefficients"));
    d.iterations = j.at("iterations").get<int>();
    d.converged = j.at("converged").get<bool>();
    d.objective = number_from(j.at("objective"));
    if (j.contains("pilot")) d.pilot = vector_from(j.at("pilot"));
    return d;
  } catch (const json::exception& e) {
    parse_fail(std::string("malformed result document: ") + e.what());
  }
}

std::string to_csv(const ResultDocument& doc) {
  std::string out = "name,value\n";
  auto row = [&](const std::string& name, const std::string& value) {
    out += name + ',' + value + '\n';
  };
  auto vec = [&](const std::string& name, const VectorXd& v) {
    for (Index i = 0; i < v.size(); ++i) row(name + '[' + std::to_string(i) + ']', format_double(v[i]));
  };
  row("schema_version", doc.schema_version);
  row("algorithm", std::string(to_string(doc.algorithm)));
  for (size_t k = 0; k < doc.levels.size(); ++k)
    row("level[" + std::to_string(k) + ']', format_double(doc.levels[k]));
  row("regularized", doc.regularized ? "true" : "false");
  if (doc.lambda) row("lambda", format_double(*doc.lambda));
  row("max_iter", std::to_string(doc.options.max_iter));
  row("tol", format_double(doc.options.tol));
  row("rho", format_double(doc.options.rho));
  row("eps_mm", format_double(doc.options.eps_mm));
  row("eps_abs", format_double(doc.options.eps_abs));
  row("eps_rel", format_double(doc.options.eps_rel));
  vec("intercept", doc.intercepts);
  for (Index j = 0; j < doc.coefficients.size(); ++j) {
    const auto idx = static_cast<size_t>(j);
    const std::string label = idx < doc.covariates.size() ? "coefficient:" + doc.covariates[idx]
                                                          : "coefficient[" + std::to_string(j) + ']';
    row(label, format_double(doc.coefficients[j]));
  }
  row("iterations", std::to_string(doc.iterations));
  row("converged", doc.converged ? "true" : "false");
  row("objective", format_double(doc.objective));
  if (doc.pilot) vec("pilot", *doc.pilot);
  return out;
}

// Simulation reports

std::string to_json(const SimReport& report) {
  json j;
  j["schema_version"] = std::string(kSchemaVersion);
  j["preset"] = report.preset;
  j["levels"] = report.levels;
  j["regularized"] = report.regularized;
  j["lambda"] = report.lambda ? json(*report.lambda) : json(nullptr);
  j["lambda_defaulted"] = report.lambda_defaulted;
  j["true_support_size"] = report.true_support_size;
  j["base_seed"] = report.base_seed;
  j["intercept"] = report.intercept;
  json rows = json::array();
  for (const SimRow& r : report.rows)
    rows.push_back({{"n", r.n},
                    {"p", r.p},
                    {"algorithm", std::string(to_string(r.algorithm))},
                    {"mean_error", number(r.mean_error)},
                    {"mean_N_T", number(r.mean_n_true)},
                    {"mean_N_F", number(r.mean_n_false)},
                    {"mean_seconds", number(r.mean_seconds)},
                    {"reps", r.reps},
                    {"failures", r.failures},
                    {"flagged", r.flagged}});
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

SimReport report_from_json(std::string_view text) {
  const json j = parse_json(text);
  try {
    SimReport r;
    r.preset = j.at("preset").get<std::string>();
    r.levels = j.at("levels").get<std::vector<double>>();
    r.regularized = j.at("regularized").get<bool>();
    if (!j.at("lambda").is_null()) r.lambda = j.at("lambda").get<double>();
    r.lambda_defaulted = j.at("lambda_defaulted").get<bool>();
    r.true_support_size = j.at("true_support_size").get<Index>();
    r.base_seed = j.at("base_seed").get<std::uint64_t>();
    r.intercept = j.at("intercept").get<double>();
    for (const json& row : j.at("rows")) {
      SimRow s;
      s.n = row.at("n").get<Index>();
      s.p = row.at("p").get<Index>();
      s.algorithm = parse_algorithm(row.at("algorithm").get<std::string>());
      s.mean_error = number_from(row.at("mean_error"));
      s.mean_n_true = number_from(row.at("mean_N_T"));
      s.mean_n_false = number_from(row.at("mean_N_F"));
      s.mean_seconds = number_from(row.at("mean_seconds"));
      s.reps = row.at("reps").get<int>();
      s.failures = row.at("failures").get<int>();
      s.flagged = row.at("flagged").get<bool>();
      r.rows.push_back(s);
    }
    return r;
  } catch (const json::exception& e) {
    parse_fail(std::string("malformed simulation report: ") + e.what());
  }
}

std::string to_csv(const SimReport& report) {
  std::string out;
  auto meta = [&](const std::string& key, const std::string& value) {
    out += "# " + key + '=' + value + '\n';
  };
  meta("schema_version", std::string(kSchemaVersion));
  meta("preset", report.preset);
  meta("levels", join_doubles(report.levels));
  meta("regularized", report.regularized ? "true" : "false");
  meta("lambda", report.lambda ? format_double(*report.lambda) : "none");
  meta("lambda_defaulted", report.lambda_defaulted ? "true" : "false");
  meta("true_support_size", std::to_string(report.true_support_size));
  meta("base_seed", std::to_string(report.base_seed));
  meta("intercept", format_double(report.intercept));
  std::string failures;
  for (size_t i = 0; i < report.rows.size(); ++i) {
    if (i) failures += ',';
    failures += std::to_string(report.rows[i].failures);
  }
  meta("failures", failures);
  out += "n,p,algorithm,mean_error,mean_N_T,mean_N_F,mean_seconds,reps\n";
  for (const SimRow& r : report.rows) {
    out += std::to_string(r.n) + ',' + std::to_string(r.p) + ',' + std::string(to_string(r.algorithm)) +
           ',' + format_double(r.mean_error) + ',' + format_double(r.mean_n_true) + ',' +
           format_double(r.mean_n_false) + ',' + format_double(r.mean_seconds) + ',' +
           std::to_string(r.reps) + '\n';
  }
  return out;
}

SimReport report_from_csv(std::string_view text) {
  SimReport r;
  std::vector<int> failures;
  bool header_seen = false;
  size_t start = 0;
  int line_no = 0;
  auto need_double = [&](std::string_view s, const std::string& what) {
    const auto v = parse_double(s);
    if (!v) parse_fail("line " + std::to_string(line_no) + ": bad " + what + " '" + std::string(s) + "'");
    return *v;
  };
  auto need_int = [&](std::string_view s, const std::string& what) -> long long {
    long long v = 0;
    s = trim(s);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
      parse_fail("line " + std::to_string(line_no) + ": bad " + what + " '" + std::string(s) + "'");
    return v;
  };
  while (start < text.size()) {
    size_t pos = text.find('\n', start);
    if (pos == std::string_view::npos) pos = text.size();
    const std::string_view line = trim(text.substr(start, pos - start));
    start = pos + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      const auto body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) continue;
      const std::string key(trim(body.substr(0, eq)));
      const auto value = trim(body.substr(eq + 1));
      if (key == "preset") r.preset = std::string(value);
      else if (key == "levels") {
        for (auto cell : split(value, ',')) r.levels.push_back(need_double(cell, "level"));
      } else if (key == "regularized") r.regularized = value == "true";
      else if (key == "lambda") {
        if (value != "none") r.lambda = need_double(value, "lambda");
      } else if (key == "lambda_defaulted") r.lambda_defaulted = value == "true";
      else if (key == "true_support_size") r.true_support_size = need_int(value, "support size");
      else if (key == "base_seed") {
        const auto res = std::from_chars(value.data(), value.data() + value.size(), r.base_seed);
        if (res.ec != std::errc() || res.ptr != value.data() + value.size())
          parse_fail("line " + std::to_string(line_no) + ": bad seed '" + std::string(value) + "'");
      }
      else if (key == "intercept") r.intercept = need_double(value, "intercept");
      else if (key == "failures" && !value.empty()) {
        for (auto cell : split(value, ',')) failures.push_back(static_cast<int>(need_int(cell, "failure count")));
      }
      continue;
    }
    if (!header_seen) {
      if (line != "n,p,algorithm,mean_error,mean_N_T,mean_N_F,mean_seconds,reps")
        parse_fail("line " + std::to_string(line_no) + ": unexpected report header");
      header_seen = true;
      continue;
    }
    const auto cells = split(line, ',');
    if (cells.size() != 8)
      parse_fail("line " + std::to_string(line_no) + ": expected 8 fields, found " + std::to_string(cells.size()));
    SimRow s;
    s.n = need_int(cells[0], "n");
    s.p = need_int(cells[1], "p");
    s.algorithm = parse_algorithm(cells[2]);
    s.mean_error = need_double(cells[3], "mean_error");
    s.mean_n_true = need_double(cells[4], "mean_N_T");
    s.mean_n_false = need_double(cells[5], "mean_N_F");
    s.mean_seconds = need_double(cells[6], "mean_seconds");
    s.reps = static_cast<int>(need_int(cells[7], "reps"));
    r.rows.push_back(s);
  }
  if (!header_seen) parse_fail("report has no header row");
  for (size_t i = 0; i < r.rows.size() && i < failures.size(); ++i) {
    r.rows[i].failures = failures[i];
    r.rows[i].flagged = failures[i] * 5 > r.rows[i].reps;
  }
  return r;
}

}  // namespace cqr::io
