#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out, err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "cqr_cli_test";
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args, const std::string& env = "") {
  const fs::path out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" CQR_CLI_PATH "' " + args + " >'" +
                          out.string() + "' 2>'" + err.string() + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// y = 1 + 2 a - b on six rows plus one outlier
std::string small_csv() {
  const fs::path p = scratch() / "small.csv";
  std::ofstream(p) << "a,y,b\n0,1,0\n1,3,0\n0,0,1\n1,2,1\n2,5,0\n0,-1,2\n2,9,1\n";
  return p.string();
}

std::string strip_seconds(const std::string& s) {
  return std::regex_replace(s, std::regex("\"mean_seconds\": [^,\\n]*"), "\"mean_seconds\": _");
}

}  // namespace

TEST_CASE("fit with one level writes JSON to stdout") {
  const Run r = run("fit --input '" + small_csv() + "' --response y --tau 0.5 --algorithm ip");
  CHECK(r.code == 0);
  const auto doc = nlohmann::json::parse(r.out);
  CHECK(doc["schema_version"] == "1.0");
  CHECK(doc["request"]["algorithm"] == "ip");
  CHECK(doc["covariates"] == nlohmann::json({"a", "b"}));
  CHECK(std::abs(doc["intercepts"][0].get<double>() - 1.0) < 1e-6);
  CHECK(std::abs(doc["coefficients"][0].get<double>() - 2.0) < 1e-6);
  CHECK(std::abs(doc["coefficients"][1].get<double>() + 1.0) < 1e-6);
  CHECK(doc["converged"] == true);
  CHECK(r.err.find("converged") != std::string::npos);
}

TEST_CASE("fit with three levels, CSV format and an output file") {
  const fs::path out = scratch() / "fit.csv";
  fs::remove(out);
  const Run r = run("fit --input '" + small_csv() + "' --response y --tau 0.2,0.5,0.8 --algorithm CD" +
                    " --format csv --output '" + out.string() + "'");
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  const std::string text = slurp(out);
  CHECK(text.rfind("name,value\n", 0) == 0);
  CHECK(text.find("intercept[2],") != std::string::npos);
  CHECK(text.find("coefficient:b,") != std::string::npos);
}

TEST_CASE("an unconverged fit still emits its document") {
  const Run r = run("fit --input '" + small_csv() + "' --response y --tau 0.5 --algorithm admm --max-iter 1");
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.out)["converged"] == false);
}

TEST_CASE("a failed pilot exits 2 and names the stage") {
  const Run r = run("fit --input '" + small_csv() +
                    "' --response y --tau 0.5 --algorithm admm --max-iter 2 --lambda 0.5");
  CHECK(r.code == 2);
  CHECK(r.out.empty());
  CHECK(r.err.find("pilot") != std::string::npos);
}

TEST_CASE("usage and input errors") {
  CHECK(run("fit --response y --tau 0.5 --algorithm ip").code == 64);
  CHECK(run("fit --input x.csv --response y --tau 0.5 --algorithm simplex").code == 64);
  CHECK(run("fit --input '" + small_csv() + "' --response y --tau half --algorithm ip").code == 64);
  CHECK(run("fit --input /nonexistent.csv --response y --tau 0.5 --algorithm ip").code == 1);
  CHECK(run("fit --input '" + small_csv() + "' --response z --tau 0.5 --algorithm ip").code == 1);
  CHECK(run("fit --input '" + small_csv() + "' --response y --tau 1.5 --algorithm ip").code == 1);
  CHECK(run("simulate --preset lasso --n 10 --p 2 --algorithms cd --output x").code == 64);
  CHECK(run("simulate --preset qr-noreg --n 10 --p 2 --algorithms cd,lp --output x").code == 64);
  CHECK(run("").code == 64);
}

TEST_CASE("simulate writes one row per algorithm") {
  const fs::path out = scratch() / "sim.json";
  const Run r = run("simulate --preset qr-noreg --n 60 --p 3 --reps 2 --seed 11 --algorithms admm,mm,cd,ip"
                    " --output '" + out.string() + "'");
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  const auto doc = nlohmann::json::parse(slurp(out));
  REQUIRE(doc["rows"].size() == 4);
  CHECK(doc["rows"][3]["algorithm"] == "ip");
  CHECK(doc["base_seed"] == 11);

  const fs::path csv = scratch() / "sim.csv";
  CHECK(run("simulate --preset cqr-noreg --n 60 --p 3 --reps 1 --algorithms cd --format csv --output '" +
            csv.string() + "'").code == 0);
  CHECK(slurp(csv).find("\nn,p,algorithm,mean_error,mean_N_T,mean_N_F,mean_seconds,reps\n60,3,cd,") !=
        std::string::npos);
}

TEST_CASE("simulate is reproducible and CQR_SEED overrides --seed") {
  const fs::path a = scratch() / "a.json", b = scratch() / "b.json", c = scratch() / "c.json";
  const std::string common = "simulate --preset qr-reg --n 40 --p 12 --reps 2 --algorithms cd --output ";
  CHECK(run(common + "'" + a.string() + "' --seed 5").code == 0);
  CHECK(run(common + "'" + b.string() + "' --seed 5").code == 0);
  CHECK(strip_seconds(slurp(a)) == strip_seconds(slurp(b)));

  CHECK(run(common + "'" + c.string() + "' --seed 99", "CQR_SEED=5").code == 0);
  CHECK(strip_seconds(slurp(c)) == strip_seconds(slurp(a)));
  CHECK(nlohmann::json::parse(slurp(c))["base_seed"] == 5);
  CHECK(run(common + "'" + c.string() + "'", "CQR_SEED=abc").code == 64);
}
