#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "logsde/manifest.hpp"

using namespace logsde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("logsde_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("manifests round-trip through JSON") {
  const std::string text = R"({
    "schema_version": 1,
    "experiment": "simulate",
    "field": {"key": "constant", "params": {"d": 1, "m": 1, "b": 2.0, "sigma0": 0.0}},
    "params": {"eps": 1.0, "n": 16, "x0": [1.5]},
    "seed": 7
  })";
  const Manifest m = Manifest::from_string(text);
  const Manifest again = Manifest::from_json(m.to_json());
  CHECK(m.canonical() == again.canonical());
  CHECK(m.digest() == again.digest());
  CHECK(m.digest_hex().size() == 16);

  Manifest other = m;
  other.seed = 8;
  CHECK(other.digest() != m.digest());
}

TEST_CASE("manifest validation failures") {
  CHECK_THROWS_AS(Manifest::from_string("not json"), validation_error);
  CHECK_THROWS_AS(Manifest::from_string(R"({"experiment": "no_such"})"), validation_error);
  CHECK_THROWS_AS(Manifest::from_string(R"({"experiment": "simulate"})"), validation_error);
  CHECK_THROWS_AS(Manifest::from_string(R"({"schema_version": 2, "experiment": "osgood"})"),
                  validation_error);
}

TEST_CASE("simulate manifest writes the analytic straight line") {
  const Manifest m = Manifest::from_string(R"({
    "experiment": "simulate",
    "field": {"key": "constant", "params": {"d": 1, "m": 1, "b": 2.0, "sigma0": 0.0}},
    "params": {"eps": 1.0, "n": 4, "x0": [1.5], "T": 1.0},
    "seed": 3
  })");
  const fs::path dir = fresh_dir("simulate");
  const RunResult r = run_manifest(m, dir.string(), 1, false);
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "simulate.csv");
  CHECK(csv.find("# manifest_digest=" + m.digest_hex()) == 0);
  CHECK(csv.find("t,c0") != std::string::npos);
  CHECK(csv.find("\n0,1.5\n") != std::string::npos);
  CHECK(csv.find("\n0.5,2.5\n") != std::string::npos);
  CHECK(csv.find("\n1,3.5\n") != std::string::npos);
  const std::string summary = slurp(dir / "simulate_summary.json");
  CHECK(summary.find(m.digest_hex()) != std::string::npos);
}

TEST_CASE("dry runs validate without writing") {
  const Manifest m = Manifest::from_string(R"({
    "experiment": "osgood",
    "params": {"profile": "log_reciprocal", "a": 0.5},
    "seed": 0
  })");
  const fs::path dir = fresh_dir("dry");
  const RunResult r = run_manifest(m, dir.string(), 1, true);
  CHECK(r.exit_code == 0);
  CHECK(fs::is_empty(dir));
}

TEST_CASE("bad field keys exit with the validation code") {
  Manifest m = Manifest::from_string(R"({
    "experiment": "simulate",
    "field": {"key": "constant"},
    "params": {}
  })");
  m.field_key = "no_such_field";
  const fs::path dir = fresh_dir("badkey");
  const RunResult r = run_manifest(m, dir.string(), 1, false);
  CHECK(r.exit_code == 2);
  CHECK(r.diagnostic.find("unknown field key") != std::string::npos);
  CHECK(r.diagnostic.find("validation") != std::string::npos);
}

TEST_CASE("numerical failures exit with code 3") {
  // An event no control can reach at this resolution: infeasible rate solve.
  const Manifest m = Manifest::from_string(R"({
    "experiment": "rate",
    "field": {"key": "constant", "params": {"d": 1, "m": 1, "b": 0.0, "sigma0": 0.0}},
    "params": {"event": {"kind": "terminal_hit", "target": [1.0]}, "knots": 8, "restarts": 1},
    "seed": 1
  })");
  const fs::path dir = fresh_dir("numfail");
  const RunResult r = run_manifest(m, dir.string(), 1, false);
  CHECK(r.exit_code == 3);
  CHECK(r.diagnostic.find("infeasible") != std::string::npos);
}

TEST_CASE("osgood manifest reports the verdict in JSON") {
  const Manifest m = Manifest::from_string(R"({
    "experiment": "osgood",
    "params": {"profile": "log_squared", "a": 0.5},
    "seed": 0
  })");
  const fs::path dir = fresh_dir("osgood");
  const RunResult r = run_manifest(m, dir.string(), 1, false);
  REQUIRE(r.exit_code == 0);
  const std::string summary = slurp(dir / "osgood_summary.json");
  CHECK(summary.find("\"verdict\": \"converges\"") != std::string::npos);
  CHECK(summary.find("\"rungs\"") != std::string::npos);
}

TEST_CASE("reruns are byte-identical for any thread cap") {
  const Manifest m = Manifest::from_string(R"({
    "experiment": "stability",
    "field": {"key": "sine_series", "params": {"K": 50, "sigma0": 1.0}},
    "params": {"eps": 0.04, "x0": [0.5, 0.5], "delta_ladder": [0.3, 0.1], "threshold": 0.5,
               "trials": 200, "n": 256},
    "seed": 42
  })");
  const fs::path d1 = fresh_dir("rerun1");
  const fs::path d2 = fresh_dir("rerun2");
  REQUIRE(run_manifest(m, d1.string(), 1, false).exit_code == 0);
  REQUIRE(run_manifest(m, d2.string(), 3, false).exit_code == 0);
  CHECK(slurp(d1 / "stability.csv") == slurp(d2 / "stability.csv"));
  CHECK(slurp(d1 / "stability_summary.json") == slurp(d2 / "stability_summary.json"));
}

TEST_CASE("rate manifest emits the optimizer row and minimizer path") {
  const Manifest m = Manifest::from_string(R"({
    "experiment": "rate",
    "field": {"key": "constant", "params": {"d": 1, "m": 1, "b": 0.0, "sigma0": 1.0}},
    "params": {"event": {"kind": "terminal_hit", "target": [1.0]}, "knots": 32, "restarts": 2},
    "seed": 7
  })");
  const fs::path dir = fresh_dir("rate");
  const RunResult r = run_manifest(m, dir.string(), 1, false);
  REQUIRE(r.exit_code == 0);
  const std::string csv = slurp(dir / "rate.csv");
  CHECK(csv.find("I,residual,knots,restarts,feasible") != std::string::npos);
  // parse the I value from the data row
  std::istringstream rows(csv);
  std::string line;
  std::getline(rows, line);  // digest
  std::getline(rows, line);  // header
  std::getline(rows, line);  // data
  const double I = std::stod(line.substr(0, line.find(',')));
  CHECK(std::abs(I - 0.5) <= 1e-3);
  CHECK(fs::exists(dir / "rate_minimizer.csv"));
}
