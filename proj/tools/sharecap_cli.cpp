// SPDX-License-Identifier: Apache-2.0
//
// sharecap command-line tool: solve, classify, sweep and validate JSON
// problem instances. stdout carries data (JSON or CSV) only; diagnostics go
// to stderr as JSON. Exit codes: 0 ok, 1 parse/schema error, 2 infeasible or
// degenerate instance, 3 sweep finished with failed grid points, 4 validation
// gap above tolerance.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sharecap/io.hpp"
#include "sharecap/log.hpp"
#include "sharecap/oracle.hpp"
#include "sharecap/problem.hpp"
#include "sharecap/regimes.hpp"
#include "sharecap/solver.hpp"

namespace {

using nlohmann::json;

// 17 significant digits: enough to round-trip an IEEE double exactly.
std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void diagnostic(const std::string& kind, const std::string& detail) {
  json j;
  j["error"] = kind;
  j["detail"] = detail;
  std::cerr << j.dump() << "\n";
}

int emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return 0;
  }
  std::ofstream f(out_path);
  if (!f) {
    diagnostic("io", "cannot open output file: " + out_path);
    return 1;
  }
  f << text;
  return 0;
}

struct SweepSpec {
  bool on_total_power = true;
  int user_index = 0;  // 0-based, valid when !on_total_power
  double start = 0.0;
  double stop = 0.0;
  int points = 0;
  bool log_spaced = false;

  double value_at(int i) const {
    if (points == 1) return start;
    const double t = static_cast<double>(i) / static_cast<double>(points - 1);
    if (log_spaced) return start * std::pow(stop / start, t);
    return start + (stop - start) * t;
  }
};

SweepSpec parse_sweep_spec(const std::string& param, const std::string& grid, bool log_spaced,
                           int num_users) {
  SweepSpec spec;
  spec.log_spaced = log_spaced;
  if (param == "pt") {
    spec.on_total_power = true;
  } else if (param.rfind("pi:", 0) == 0) {
    spec.on_total_power = false;
    std::size_t pos = 0;
    int k = 0;
    try {
      k = std::stoi(param.substr(3), &pos);
    } catch (const std::exception&) {
      throw sharecap::ParseError("--param: cannot parse user index in \"" + param + "\"");
    }
    if (pos != param.size() - 3 || k < 1 || k > num_users) {
      throw sharecap::ParseError("--param: user index out of range in \"" + param +
                                 "\" (instance has " + std::to_string(num_users) + " users)");
    }
    spec.user_index = k - 1;
  } else {
    throw sharecap::ParseError("--param must be \"pt\" or \"pi:<k>\", got \"" + param + "\"");
  }

  std::istringstream gs(grid);
  std::string a, b, c;
  if (!std::getline(gs, a, ':') || !std::getline(gs, b, ':') || !std::getline(gs, c) ||
      a.empty() || b.empty() || c.empty()) {
    throw sharecap::ParseError("--grid must be start:stop:points, got \"" + grid + "\"");
  }
  try {
    std::size_t pa = 0, pb = 0, pc = 0;
    spec.start = std::stod(a, &pa);
    spec.stop = std::stod(b, &pb);
    spec.points = std::stoi(c, &pc);
    if (pa != a.size() || pb != b.size() || pc != c.size()) {
      throw std::invalid_argument("trailing characters");
    }
  } catch (const std::exception& e) {
    throw sharecap::ParseError("--grid: cannot parse \"" + grid + "\": " + e.what());
  }
  if (spec.points < 1) throw sharecap::ParseError("--grid: points must be >= 1");
  if (log_spaced && (spec.start <= 0.0 || spec.stop <= 0.0)) {
    throw sharecap::ParseError("--log requires positive grid endpoints");
  }
  return spec;
}

int cmd_solve(const std::string& path, const std::string& method, double tol,
              const std::string& out) {
  const sharecap::ProblemInstance inst = sharecap::load_instance(path);
  const sharecap::RegimeReport regime = sharecap::classify(inst);
  sharecap::DualSearchSettings settings;
  settings.residual_tol = tol;

  sharecap::Solution sol;
  if (method == "auto") {
    sol = sharecap::solve(inst, settings);
  } else if (method == "general") {
    sol = sharecap::solve_general(inst, settings);
  } else {
    const sharecap::Solution raw = sharecap::oracle_projected_gradient(inst);
    sol = sharecap::finalize_solution(inst, raw.covariance, raw.duals,
                                      sharecap::SolveMethod::kOracle, settings.tol);
  }
  return emit(sharecap::solution_to_json(sol, regime).dump(2) + "\n", out);
}

int cmd_classify(const std::string& path, const std::string& out) {
  const sharecap::ProblemInstance inst = sharecap::load_instance(path);
  return emit(sharecap::regime_to_json(sharecap::classify(inst)).dump(2) + "\n", out);
}

int cmd_sweep(const std::string& path, const std::string& param, const std::string& grid,
              bool log_spaced, const std::string& out, int jobs) {
  const sharecap::ProblemInstance base = sharecap::load_instance(path);
  sharecap::validate_instance(base);
  const SweepSpec spec = parse_sweep_spec(param, grid, log_spaced, base.num_users());
  const int num_users = base.num_users();

  std::ostringstream header;
  header << "param,capacity_nats,trace_R,mu1";
  for (int k = 1; k <= num_users; ++k) header << ",interference_" << k;
  header << ",active_tpc";
  for (int k = 1; k <= num_users; ++k) header << ",active_ipc_" << k;

  std::vector<std::string> rows(static_cast<std::size_t>(spec.points));
  std::atomic<bool> any_failed{false};
  std::atomic<int> next{0};

  const auto worker = [&]() {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= spec.points) return;
      const double v = spec.value_at(i);
      std::ostringstream row;
      row << fmt(v);
      try {
        sharecap::ProblemInstance inst = base;
        if (spec.on_total_power) {
          inst.total_power = v;
        } else {
          inst.users[static_cast<std::size_t>(spec.user_index)].cap = v;
        }
        const sharecap::Solution sol = sharecap::solve(inst);
        row << ',' << fmt(sol.capacity_nats) << ',' << fmt(sol.covariance.trace_real()) << ','
            << fmt(sol.duals.mu1);
        for (int k = 0; k < num_users; ++k) {
          row << ',' << fmt(sharecap::interference_power(inst, sol.covariance, k));
        }
        row << ',' << (sol.tpc_active ? 1 : 0);
        for (int k = 0; k < num_users; ++k) {
          row << ',' << (sol.ipc_active[static_cast<std::size_t>(k)] ? 1 : 0);
        }
      } catch (const std::exception& e) {
        sharecap::log_error(std::string("sweep point ") + fmt(v) + " failed: " + e.what());
        // 3 fixed columns + K interference + 1 TPC flag + K IPC flags.
        for (int c = 0; c < 4 + 2 * num_users; ++c) row << ",nan";
        any_failed = true;
      }
      rows[static_cast<std::size_t>(i)] = row.str();
    }
  };

  const int thread_count = std::max(1, std::min(jobs, spec.points));
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::ostringstream text;
  text << header.str() << "\n";
  for (const auto& row : rows) text << row << "\n";
  const int rc = emit(text.str(), out);
  if (rc != 0) return rc;
  return any_failed ? 3 : 0;
}

int cmd_validate(const std::string& path, const std::string& oracle_kind, double tol) {
  const sharecap::ProblemInstance inst = sharecap::load_instance(path);
  const sharecap::Solution sol = sharecap::solve(inst);
  const sharecap::Solution ref = oracle_kind == "grid"
                                     ? sharecap::oracle_bruteforce_2x2(inst)
                                     : sharecap::oracle_projected_gradient(inst);
  const sharecap::ComparisonReport rep = sharecap::compare(inst, sol, ref, tol);

  json j;
  j["capacity_solver"] = sol.capacity_nats;
  j["capacity_oracle"] = ref.capacity_nats;
  j["capacity_gap"] = rep.capacity_gap;
  j["max_covariance_diff"] = rep.max_covariance_diff;
  j["solver_feasible"] = rep.a_feasible;
  j["oracle_feasible"] = rep.b_feasible;
  j["method"] = sharecap::to_string(sol.method);
  j["pass"] = rep.pass;
  std::cout << j.dump(2) << "\n";
  return rep.pass ? 0 : 4;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const sharecap::ParseError& e) {
    diagnostic("parse", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    diagnostic("invalid-instance", e.what());
    return 2;
  } catch (const sharecap::SolverError& e) {
    diagnostic("solver", e.what());
    return 2;
  } catch (const std::exception& e) {
    diagnostic("internal", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Capacity and optimal transmit covariance of a Gaussian vector channel "
      "under a total power constraint and per-user interference caps"};
  app.require_subcommand(1);

  std::string instance_path;
  std::string out_path;
  std::string method = "auto";
  std::string param;
  std::string grid;
  std::string oracle_kind = "pg";
  double solve_tol = 1e-6;
  double validate_tol = 1e-4;
  bool log_spaced = false;
  int jobs = 1;

  CLI::App* solve = app.add_subcommand("solve", "Solve an instance and print a solution file");
  solve->add_option("instance", instance_path, "instance JSON path")->required();
  solve->add_option("--method", method, "auto | general | oracle")
      ->check(CLI::IsMember({"auto", "general", "oracle"}));
  solve->add_option("--tol", solve_tol, "solver residual tolerance (default 1e-6)");
  solve->add_option("--out", out_path, "write JSON here instead of stdout");

  CLI::App* classify = app.add_subcommand("classify", "Print the regime report for an instance");
  classify->add_option("instance", instance_path, "instance JSON path")->required();
  classify->add_option("--out", out_path, "write JSON here instead of stdout");

  CLI::App* sweep = app.add_subcommand("sweep", "Sweep a budget parameter and print CSV");
  sweep->add_option("instance", instance_path, "instance JSON path")->required();
  sweep->add_option("--param", param, "pt (total power) or pi:<k> (cap of user k, 1-based)")
      ->required();
  sweep->add_option("--grid", grid, "start:stop:points")->required();
  sweep->add_flag("--log", log_spaced, "geometric instead of linear spacing");
  sweep->add_option("--out", out_path, "write CSV here instead of stdout");
  sweep->add_option("--jobs", jobs, "worker threads (output independent of this)")
      ->check(CLI::PositiveNumber);

  CLI::App* validate =
      app.add_subcommand("validate", "Cross-check the solver against a reference maximizer");
  validate->add_option("instance", instance_path, "instance JSON path")->required();
  validate->add_option("--oracle", oracle_kind, "pg (projected gradient) | grid (2x2 only)")
      ->check(CLI::IsMember({"pg", "grid"}));
  validate->add_option("--tol", validate_tol, "capacity gap tolerance (default 1e-4)");

  CLI11_PARSE(app, argc, argv);

  if (solve->parsed()) {
    return guarded([&] { return cmd_solve(instance_path, method, solve_tol, out_path); });
  }
  if (classify->parsed()) {
    return guarded([&] { return cmd_classify(instance_path, out_path); });
  }
  if (sweep->parsed()) {
    return guarded(
        [&] { return cmd_sweep(instance_path, param, grid, log_spaced, out_path, jobs); });
  }
  return guarded([&] { return cmd_validate(instance_path, oracle_kind, validate_tol); });
}
