// SPDX-License-Identifier: Apache-2.0
//
// End-to-end checks of the command-line tool: spawn the real binary, capture
// its streams, and verify exit codes, JSON payloads, and CSV sweeps.

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path dir = fs::path("/tmp") / "sharecap_cli_tests";
  fs::create_directories(dir);
  const fs::path out = dir / ("out" + std::to_string(counter) + ".txt");
  const fs::path err = dir / ("err" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(SHARECAP_CLI_PATH) + " " + args + " > " + out.string() +
                          " 2> " + err.string();
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::string data_file(const std::string& name) {
  return std::string(SHARECAP_TEST_DATA) + "/" + name;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve emits a full solution document") {
  const RunResult r = run_cli("solve " + data_file("wf_diag.json"));
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["method"] == "waterfilling");
  const double expect = std::log(4.5) + std::log(1.125);
  CHECK(std::abs(j["capacity_nats"].get<double>() - expect) <= 1e-10);
  CHECK(j["capacity_bits"].get<double>() ==
        doctest::Approx(expect / std::log(2.0)).epsilon(1e-12));
  CHECK(j["active_constraints"]["tpc"].get<bool>());
  CHECK(j["kkt_residuals"]["stationarity"].get<double>() <= 1e-8);
  CHECK(j["regime"]["unbounded_growth"].get<bool>());
}

TEST_CASE("solve picks the closed form and --method overrides it") {
  const std::string file = data_file("prop4.json");
  const RunResult fast = run_cli("solve " + file);
  REQUIRE(fast.code == 0);
  const json jf = json::parse(fast.out);
  CHECK(jf["method"] == "prop4");
  CHECK(std::abs(jf["capacity_nats"].get<double>() - std::log(4.5)) <= 1e-10);
  CHECK(jf["duals"]["mu1"].get<double>() == 0.0);
  CHECK(jf["duals"]["mu2"][0].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK_FALSE(jf["active_constraints"]["tpc"].get<bool>());
  CHECK(jf["active_constraints"]["ipc"][0].get<bool>());

  const RunResult gen = run_cli("solve --method general " + file);
  REQUIRE(gen.code == 0);
  const json jg = json::parse(gen.out);
  CHECK(jg["method"] == "general");
  CHECK(std::abs(jg["capacity_nats"].get<double>() - std::log(4.5)) <= 1e-6);

  const RunResult ora = run_cli("solve --method oracle " + file);
  REQUIRE(ora.code == 0);
  const json jo = json::parse(ora.out);
  CHECK(jo["method"] == "oracle");
  CHECK(std::abs(jo["capacity_nats"].get<double>() - std::log(4.5)) <= 1e-4);
}

TEST_CASE("solve --out writes the document to disk") {
  const fs::path out = fs::path("/tmp/sharecap_cli_tests") / "solution.json";
  fs::create_directories(out.parent_path());
  fs::remove(out);
  const RunResult r = run_cli("solve --out " + out.string() + " " + data_file("wf_diag.json"));
  REQUIRE(r.code == 0);
  REQUIRE(fs::exists(out));
  const json j = json::parse(slurp(out));
  CHECK(j.contains("capacity_nats"));
  CHECK(j.contains("R"));
}

TEST_CASE("zero-capacity instances solve cleanly to zero") {
  const RunResult r = run_cli("solve " + data_file("zero_capacity.json"));
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK(j["capacity_nats"].get<double>() == 0.0);
  CHECK(j["regime"]["zero_capacity"].get<bool>());
}

TEST_CASE("error handling") {
  SUBCASE("missing file") {
    const RunResult r = run_cli("solve /nonexistent/instance.json");
    CHECK(r.code == 1);
    const json diag = json::parse(r.err);
    CHECK(diag.contains("error"));
  }
  SUBCASE("malformed JSON") {
    const RunResult r = run_cli("solve " + data_file("bad_syntax.json"));
    CHECK(r.code == 1);
    CHECK(json::parse(r.err)["error"] == "parse");
  }
  SUBCASE("indefinite channel Gram matrix") {
    const RunResult r = run_cli("solve " + data_file("non_psd.json"));
    CHECK(r.code == 2);
    const json diag = json::parse(r.err);
    CHECK(diag.contains("detail"));
  }
  SUBCASE("unknown subcommand") {
    const RunResult r = run_cli("frobnicate");
    CHECK(r.code != 0);
  }
}

TEST_CASE("classify reports the growth structure") {
  const RunResult r = run_cli("classify " + data_file("prop4.json"));
  REQUIRE(r.code == 0);
  const json j = json::parse(r.out);
  CHECK_FALSE(j["unbounded_growth"].get<bool>());
  CHECK(j["tpc_redundancy_possible"].get<bool>());
  CHECK(j.contains("capacity_upper_bound_nats"));
}

TEST_CASE("sweep") {
  const std::string file = data_file("prop4.json");

  SUBCASE("csv layout and monotone capacity column") {
    const RunResult r = run_cli("sweep --param pt --grid 1:4:4 " + file);
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    CHECK(header == "param,capacity_nats,trace_R,mu1,interference_1,active_tpc,active_ipc_1");
    double prev_param = -1.0, prev_cap = -1.0;
    int rows = 0;
    for (std::string line; std::getline(lines, line);) {
      if (line.empty()) continue;
      ++rows;
      std::istringstream cells(line);
      std::string cell;
      std::getline(cells, cell, ',');
      const double param = std::stod(cell);
      std::getline(cells, cell, ',');
      const double cap = std::stod(cell);
      CHECK(param > prev_param);
      CHECK(cap >= prev_cap - 1e-12);
      prev_param = param;
      prev_cap = cap;
    }
    CHECK(rows == 4);
  }
  SUBCASE("geometric spacing over the cap") {
    const RunResult r = run_cli("sweep --param pi:1 --grid 0.1:10:3 --log " + file);
    REQUIRE(r.code == 0);
    std::istringstream lines(r.out);
    std::string line;
    std::getline(lines, line);  // header
    std::getline(lines, line);
    CHECK(std::stod(line) == doctest::Approx(0.1).epsilon(1e-12));
    std::getline(lines, line);
    CHECK(std::stod(line) == doctest::Approx(1.0).epsilon(1e-12));
    std::getline(lines, line);
    CHECK(std::stod(line) == doctest::Approx(10.0).epsilon(1e-12));
  }
  SUBCASE("identical output regardless of the worker count") {
    const fs::path a = fs::path("/tmp/sharecap_cli_tests") / "sweep1.csv";
    const fs::path b = fs::path("/tmp/sharecap_cli_tests") / "sweep8.csv";
    REQUIRE(run_cli("sweep --param pt --grid 0.5:8:13 --jobs 1 --out " + a.string() + " " + file)
                .code == 0);
    REQUIRE(run_cli("sweep --param pt --grid 0.5:8:13 --jobs 8 --out " + b.string() + " " + file)
                .code == 0);
    CHECK(slurp(a) == slurp(b));
    CHECK_FALSE(slurp(a).empty());
  }
  SUBCASE("rows that cannot be solved become nan and flip the exit code") {
    const RunResult r = run_cli("sweep --param pt --grid 0:1:3 " + file);
    CHECK(r.code == 3);
    std::istringstream lines(r.out);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    CHECK(first == "0,nan,nan,nan,nan,nan,nan");
  }
  SUBCASE("bad parameter spec") {
    CHECK(run_cli("sweep --param pi:2 --grid 1:2:2 " + file).code == 1);
    CHECK(run_cli("sweep --param pt --grid 2:1:0 " + file).code == 1);
    CHECK(run_cli("sweep --param pt --grid 0:1:3 --log " + file).code == 1);
  }
}

TEST_CASE("validate compares the solver against an oracle") {
  SUBCASE("projected gradient referee") {
    const RunResult r = run_cli("validate " + data_file("prop4.json"));
    REQUIRE(r.code == 0);
    const json j = json::parse(r.out);
    CHECK(j["pass"].get<bool>());
    CHECK(std::abs(j["capacity_gap"].get<double>()) <= 1e-4);
  }
  SUBCASE("grid referee with a custom tolerance") {
    const RunResult r =
        run_cli("validate --oracle grid --tol 5e-3 " + data_file("wf_diag.json"));
    REQUIRE(r.code == 0);
    CHECK(json::parse(r.out)["pass"].get<bool>());
  }
}

}  // TEST_SUITE
