#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "app.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using volterra::app::run;

namespace {

const fs::path kProblems = VOLTERRA_PROBLEMS_DIR;
const fs::path kGolden = VOLTERRA_GOLDEN_DIR;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  std::vector<const char*> argv{"volterra"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run(int(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("volterra_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing " << p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

json report(const fs::path& p) { return json::parse(slurp(p)); }

std::string problem(const std::string& stem) { return (kProblems / (stem + ".json")).string(); }

/// Rows of a data CSV, skipping the comment and header lines.
std::vector<std::vector<std::string>> rows(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::string line;
  std::vector<std::vector<std::string>> out;
  int skipped = 0;
  while (std::getline(in, line)) {
    if (skipped < 2) {
      ++skipped;
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    out.push_back(cells);
  }
  return out;
}

/// Byte comparison against tests/golden. VOLTERRA_UPDATE_GOLDEN=1 rewrites the file.
void check_golden(const fs::path& produced, const std::string& name) {
  const fs::path g = kGolden / name;
  if (const char* u = std::getenv("VOLTERRA_UPDATE_GOLDEN"); u && std::string(u) == "1") fs::copy_file(produced, g, fs::copy_options::overwrite_existing);
  CHECK_MESSAGE(slurp(produced) == slurp(g), "golden mismatch: " << name);
}

}  // namespace

TEST_CASE("check") {
  const auto dir = scratch("check");
  for (const char* stem : {"reference", "shear_box", "separable_box", "exponential", "periodic_unit"}) {
    const auto r = cli({"--out", dir.string(), "-q", "check", problem(stem)});
    CHECK_MESSAGE(r.code == 0, stem << ": " << r.err);
    CHECK(report(dir / (std::string(stem) + ".check.report.json"))["status"] == "ok");
  }
  SUBCASE("understated alpha fails with a witness pair") {
    const auto r = cli({"--out", dir.string(), "-q", "check", problem("bad_alpha")});
    CHECK(r.code == 1);
    const auto rep = report(dir / "bad_alpha.check.report.json");
    CHECK(rep["exit_code"] == 1);
    const std::string dump = rep.dump();
    CHECK(dump.find("\"H3\"") != std::string::npos);
    CHECK(dump.find("witness") != std::string::npos);
  }
  SUBCASE("malformed and missing files") {
    CHECK(cli({"--out", dir.string(), "check", problem("malformed")}).code == 2);
    CHECK(cli({"--out", dir.string(), "check", problem("no_such_file")}).code == 2);
  }
}

TEST_CASE("usage errors") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"solve"}).code == 2);
  CHECK(cli({"frobnicate", problem("reference")}).code == 2);
  CHECK(cli({"solve", problem("reference"), "--seed-selection", "psychic"}).code == 2);
  CHECK(cli({"funnel", problem("reference"), "--K", "0"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("parse_problem rejects inconsistent documents") {
  const json base = json::parse(slurp(problem("reference")));
  CHECK_NOTHROW(volterra::app::parse_problem(base, "x"));
  auto bad = base;
  bad["schema"] = "volterra-problem/0";
  CHECK_THROWS_AS(volterra::app::parse_problem(bad, "x"), volterra::app::ParseError);
  bad = base;
  bad["colour"] = "blue";
  CHECK_THROWS_AS(volterra::app::parse_problem(bad, "x"), volterra::app::ParseError);
  bad = base;
  bad["h"] = {{"type", "table"}, {"values", {0, 1}}};
  CHECK_THROWS_AS(volterra::app::parse_problem(bad, "x"), volterra::app::ParseError);
  bad = base;
  bad["kernel"]["matrix"] = {{1, 2}};
  CHECK_THROWS_AS(volterra::app::parse_problem(bad, "x"), volterra::app::ParseError);
  bad = base;
  bad["intervals"] = -4;
  CHECK_THROWS_AS(volterra::app::parse_problem(bad, "x"), volterra::app::ParseError);
}

TEST_CASE("solve") {
  const auto dir = scratch("solve");
  const auto r = cli({"--out", dir.string(), "-q", "solve", problem("exponential"), "--tol", "1e-10"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto csv = dir / "exponential.solve.csv";
  const auto data = rows(csv);
  CHECK(data.size() == 257);
  double err = 0;
  for (const auto& row : data) err = std::max(err, std::abs(std::stod(row[1]) - std::exp(std::stod(row[0]))));
  CHECK(err <= 1e-3);
  CHECK(data.back()[2].empty());
  CHECK(slurp(csv).rfind("# volterra-csv/1 solution", 0) == 0);
  const auto rep = report(dir / "exponential.solve.report.json");
  CHECK(rep["schema"] == "volterra-report/1");
  CHECK(rep.dump().find("wall") == std::string::npos);
  check_golden(csv, "exponential.solve.csv");

  SUBCASE("every seed selection converges on the reference instance") {
    for (const char* seed : {"zero", "min-norm", "bang-bang", "random"}) {
      const auto s = cli({"--out", dir.string(), "-q", "solve", problem("reference"), "--seed-selection", seed});
      CHECK_MESSAGE(s.code == 0, seed << ": " << s.err);
    }
  }
  SUBCASE("non-convergence is a domain failure with partial output") {
    const auto s = cli({"--out", dir.string(), "-q", "solve", problem("shear_box"), "--max-iter", "2", "--tol", "1e-14"});
    CHECK(s.code == 1);
    CHECK(fs::exists(dir / "shear_box.solve.csv"));
    CHECK(report(dir / "shear_box.solve.report.json")["status"] == "failure");
  }
}

TEST_CASE("select") {
  const auto dir = scratch("select");
  const auto r = cli({"--out", dir.string(), "-q", "select", problem("reference"), "--epsilon", "0.1", "--nmax", "8"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto ledger = rows(dir / "reference.select.ledger.csv");
  CHECK(ledger.size() == 8 * 257);
  for (const auto& row : ledger)
    if (!row[3].empty()) CHECK(std::stod(row[3]) >= 0.0);
  check_golden(dir / "reference.select.csv", "reference.select.csv");
  check_golden(dir / "reference.select.ledger.csv", "reference.select.ledger.csv");
  const auto s = cli({"--out", dir.string(), "-q", "select", problem("shear_box")});
  CHECK_MESSAGE(s.code == 0, s.err);
}

TEST_CASE("funnel") {
  const auto dir = scratch("funnel");
  SUBCASE("reference instance carries the oracle columns") {
    const auto r = cli({"--out", dir.string(), "-q", "funnel", problem("reference"), "--K", "16"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto data = rows(dir / "reference.funnel.csv");
    CHECK(data.size() == 257);
    CHECK(data.front().size() == 6);
    for (const auto& row : data) {
      CHECK(std::stod(row[2]) <= std::stod(row[5]) + 1e-6);
      CHECK(std::stod(row[1]) >= std::stod(row[4]) - 1e-6);
    }
    CHECK(report(dir / "reference.funnel.report.json")["oracle"]["applies"] == true);
    check_golden(dir / "reference.funnel.csv", "reference.funnel.csv");
  }
  SUBCASE("planar instance has no oracle columns") {
    const auto r = cli({"--out", dir.string(), "-q", "funnel", problem("shear_box"), "--K", "8"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(rows(dir / "shear_box.funnel.csv").front().size() == 7);
    CHECK(report(dir / "shear_box.funnel.report.json")["oracle"]["applies"] == false);
  }
  SUBCASE("--jobs does not change a byte") {
    const auto a = scratch("funnel_j1"), b = scratch("funnel_j2");
    REQUIRE(cli({"--out", a.string(), "-q", "funnel", problem("shear_box"), "--K", "10", "--jobs", "1"}).code == 0);
    REQUIRE(cli({"--out", b.string(), "-q", "funnel", problem("shear_box"), "--K", "10", "--jobs", "3"}).code == 0);
    CHECK(slurp(a / "shear_box.funnel.csv") == slurp(b / "shear_box.funnel.csv"));
    CHECK(slurp(a / "shear_box.funnel.report.json") == slurp(b / "shear_box.funnel.report.json"));
  }
  SUBCASE("--rng-seed changes the sample") {
    const auto a = scratch("funnel_s1"), b = scratch("funnel_s2");
    REQUIRE(cli({"--out", a.string(), "-q", "funnel", problem("shear_box"), "--K", "6", "--rng-seed", "1"}).code == 0);
    REQUIRE(cli({"--out", b.string(), "-q", "funnel", problem("shear_box"), "--K", "6", "--rng-seed", "2"}).code == 0);
    CHECK(slurp(a / "shear_box.funnel.csv") != slurp(b / "shear_box.funnel.csv"));
  }
}

TEST_CASE("periodic") {
  const auto dir = scratch("periodic");
  const auto r = cli({"--out", dir.string(), "-q", "periodic", problem("periodic_unit")});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto data = rows(dir / "periodic_unit.periodic.csv");
  CHECK(data.size() == 257);
  for (const auto& row : data) CHECK(std::abs(std::stod(row[1]) - 1.0) <= 1e-3);
  const auto rep = report(dir / "periodic_unit.periodic.report.json");
  CHECK(rep.dump().find("periodicity_defect") != std::string::npos);
  check_golden(dir / "periodic_unit.periodic.csv", "periodic_unit.periodic.csv");

  CHECK(cli({"--out", dir.string(), "-q", "periodic", problem("periodic_interval")}).code == 0);
  CHECK(cli({"--out", dir.string(), "-q", "periodic", problem("periodic_weak")}).code == 1);
  CHECK(cli({"--out", dir.string(), "-q", "periodic", problem("reference")}).code == 1);
}

TEST_CASE("output directory from the environment") {
  const auto dir = scratch("env");
  ::setenv(volterra::app::kOutDirEnv, dir.string().c_str(), 1);
  const auto r = cli({"-q", "check", problem("reference")});
  ::unsetenv(volterra::app::kOutDirEnv);
  CHECK(r.code == 0);
  CHECK(fs::exists(dir / "reference.check.report.json"));
  const auto other = scratch("env_flag");
  ::setenv(volterra::app::kOutDirEnv, dir.string().c_str(), 1);
  CHECK(cli({"--out", other.string(), "-q", "check", problem("exponential")}).code == 0);
  ::unsetenv(volterra::app::kOutDirEnv);
  CHECK(fs::exists(other / "exponential.check.report.json"));
  CHECK_FALSE(fs::exists(dir / "exponential.check.report.json"));
}

TEST_CASE("repeated runs are byte-identical") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  for (const auto& d : {a, b}) {
    cli({"--out", d.string(), "-q", "solve", problem("shear_box")});
    cli({"--out", d.string(), "-q", "select", problem("separable_box")});
    cli({"--out", d.string(), "-q", "funnel", problem("reference"), "--K", "8"});
    cli({"--out", d.string(), "-q", "periodic", problem("periodic_interval")});
    cli({"--out", d.string(), "-q", "check", problem("shear_box")});
  }
  std::size_t compared = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    CHECK_MESSAGE(slurp(e.path()) == slurp(b / e.path().filename()), e.path().filename().string());
    ++compared;
  }
  CHECK(compared >= 9);
}
