// SPDX-License-Identifier: Apache-2.0

#include "sharecap/solver.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

#include "sharecap/regimes.hpp"
#include "support/test_instances.hpp"

using namespace sharecap;
using sharecap::testing::random_gram;
using sharecap::testing::random_instance;

namespace {

Cmat diag2(double a, double b) {
  Cmat m = Cmat::Zero(2, 2);
  m(0, 0) = a;
  m(1, 1) = b;
  return m;
}

ProblemInstance instance2(const Cmat& w1, double pt) {
  ProblemInstance inst;
  inst.w1 = HermitianMatrix(w1);
  inst.total_power = pt;
  return inst;
}

double worst_residual(const KktResiduals& kkt) {
  double worst = std::max({kkt.stationarity, kkt.comp_slack_tpc, kkt.primal_feas,
                           std::max(0.0, -kkt.dual_feas)});
  for (double v : kkt.comp_slack_ipc) worst = std::max(worst, v);
  return worst;
}

}  // namespace

TEST_SUITE("solver") {

TEST_CASE("waterfilling fixtures") {
  SUBCASE("two active modes") {
    const Solution sol = waterfilling(HermitianMatrix(diag2(4.0, 1.0)), 1.0);
    CHECK(max_abs(sol.covariance.mat() - diag2(0.875, 0.125)) <= 1e-10);
    CHECK(std::abs(sol.capacity_nats - (std::log(4.5) + std::log(1.125))) <= 1e-10);
    CHECK(sol.duals.mu1 == doctest::Approx(1.0 / 1.125).epsilon(1e-12));
    CHECK(sol.method == SolveMethod::kWaterfilling);
    CHECK(sol.tpc_active);
  }
  SUBCASE("symmetric split") {
    const Solution sol = waterfilling(HermitianMatrix::Identity(2), 2.0);
    CHECK(max_abs(sol.covariance.mat() - Cmat::Identity(2, 2)) <= 1e-10);
    CHECK(std::abs(sol.capacity_nats - 2.0 * std::log(2.0)) <= 1e-12);
  }
  SUBCASE("water level below the weak mode") {
    const Solution sol = waterfilling(HermitianMatrix(diag2(4.0, 0.01)), 0.1);
    CHECK(max_abs(sol.covariance.mat() - diag2(0.1, 0.0)) <= 1e-12);
    CHECK(std::abs(sol.capacity_nats - std::log(1.4)) <= 1e-12);
  }
  SUBCASE("grid search over the power split agrees") {
    // maximize ln(1+4p) + ln(1+(1-p)) over p in [0,1]
    double best = -1.0, best_p = 0.0;
    for (int i = 0; i <= 100000; ++i) {
      const double p = i / 100000.0;
      const double val = std::log1p(4.0 * p) + std::log1p(1.0 - p);
      if (val > best) {
        best = val;
        best_p = p;
      }
    }
    CHECK(std::abs(best_p - 0.875) <= 1e-5);
    const Solution sol = waterfilling(HermitianMatrix(diag2(4.0, 1.0)), 1.0);
    CHECK(sol.capacity_nats >= best - 1e-9);
  }
  SUBCASE("dead channel") {
    const Solution sol = waterfilling(HermitianMatrix::Zero(2), 1.0);
    CHECK(sol.capacity_nats == 0.0);
    CHECK(max_abs(sol.covariance.mat()) == 0.0);
  }
  SUBCASE("rejects nonpositive power") {
    CHECK_THROWS_AS(waterfilling(HermitianMatrix::Identity(2), 0.0), std::invalid_argument);
  }
}

TEST_CASE("covariance_for_duals") {
  ProblemInstance eye = instance2(Cmat::Identity(2, 2), 1.0);

  SUBCASE("pure power multiplier reduces to water-filling") {
    DualVariables d;
    d.mu1 = 1.0;
    CHECK(max_abs(covariance_for_duals(eye, d).mat()) == 0.0);
    d.mu1 = 0.5;
    CHECK(max_abs(covariance_for_duals(eye, d).mat() - Cmat::Identity(2, 2)) <= 1e-12);
  }
  SUBCASE("reproduces the water-filling fixture") {
    ProblemInstance inst = instance2(diag2(4.0, 1.0), 1.0);
    DualVariables d;
    d.mu1 = 1.0 / 1.125;
    CHECK(max_abs(covariance_for_duals(inst, d).mat() - diag2(0.875, 0.125)) <= 1e-12);
  }
  SUBCASE("interference-only multiplier") {
    ProblemInstance inst = instance2(Cmat::Identity(2, 2), 4.0);
    inst.users.push_back({HermitianMatrix(diag2(1.0, 2.0)), 3.0});
    DualVariables d;
    d.mu1 = 0.0;
    d.mu2 = {1.0 / 3.0};
    const HermitianMatrix r = covariance_for_duals(inst, d);
    CHECK(max_abs(r.mat() - diag2(2.0, 0.5)) <= 1e-12);
    CHECK(interference_power(inst, r, 0) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("all-zero multipliers are rejected") {
    DualVariables d;
    CHECK_THROWS_AS(covariance_for_duals(eye, d), SolverError);
  }
  SUBCASE("zero power multiplier without null containment is rejected") {
    ProblemInstance inst = instance2(Cmat::Identity(2, 2), 1.0);
    inst.users.push_back({HermitianMatrix(diag2(1.0, 0.0)), 1.0});
    DualVariables d;
    d.mu1 = 0.0;
    d.mu2 = {1.0};
    CHECK_THROWS_AS(covariance_for_duals(inst, d), SolverError);
  }
}

TEST_CASE("dual_search") {
  SUBCASE("huge caps reduce to water-filling") {
    std::mt19937 rng(41);
    for (int trial = 0; trial < 6; ++trial) {
      ProblemInstance inst = random_instance(rng, 3, 1 + trial % 3);
      for (auto& u : inst.users) u.cap = 1e12;
      const auto [duals, sol] = dual_search(inst);
      const Solution wf = waterfilling(inst.w1, inst.total_power);
      CHECK(std::abs(sol.capacity_nats - wf.capacity_nats) <= 1e-8);
      for (double mu : duals.mu2) CHECK(mu <= 1e-8);
    }
  }
  SUBCASE("interference-limited fixture") {
    ProblemInstance inst = instance2(Cmat::Identity(2, 2), 4.0);
    inst.users.push_back({HermitianMatrix(diag2(1.0, 2.0)), 3.0});
    const auto [duals, sol] = dual_search(inst);
    CHECK(duals.mu1 <= 1e-9);
    CHECK(duals.mu2[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-6));
    CHECK(max_abs(sol.covariance.mat() - diag2(2.0, 0.5)) <= 1e-6);
    CHECK(std::abs(sol.capacity_nats - std::log(4.5)) <= 1e-8);
  }
  SUBCASE("random several-user instances satisfy the optimality system") {
    std::mt19937 rng(42);
    for (int trial = 0; trial < 8; ++trial) {
      ProblemInstance inst = random_instance(rng, 3, 2);
      for (auto& u : inst.users) u.cap = std::max(u.cap, 0.05);  // keep caps positive
      const auto [duals, sol] = dual_search(inst);
      const double scale = std::max(1.0, eigh(inst.w1).eigenvalues[0]);
      CHECK(worst_residual(sol.kkt) <= 1e-6 * scale);
      CHECK(is_feasible(inst, sol.covariance).feasible);
    }
  }
  SUBCASE("settings are validated") {
    ProblemInstance inst = instance2(Cmat::Identity(2, 2), 1.0);
    DualSearchSettings bad;
    bad.max_iters = 0;
    CHECK_THROWS_AS(dual_search(inst, bad), std::invalid_argument);
  }
}

TEST_CASE("solve dispatch") {
  SUBCASE("no users yields water-filling") {
    ProblemInstance inst = instance2(diag2(4.0, 1.0), 1.0);
    const Solution sol = solve(inst);
    CHECK(sol.method == SolveMethod::kWaterfilling);
    CHECK(max_abs(sol.covariance.mat() - diag2(0.875, 0.125)) <= 1e-10);
  }
  SUBCASE("zero user channels never constrain") {
    ProblemInstance inst = instance2(diag2(4.0, 1.0), 1.0);
    inst.users.push_back({HermitianMatrix::Zero(2), 1.0});
    const Solution sol = solve(inst);
    CHECK(max_abs(sol.covariance.mat() - diag2(0.875, 0.125)) <= 1e-10);
    CHECK(sol.duals.mu2[0] == 0.0);
  }
  SUBCASE("zero-capacity certificate") {
    Cvec u(2);
    u << 1.0, 1.0;
    u /= std::sqrt(2.0);
    ProblemInstance inst;
    inst.w1 = HermitianMatrix(u * u.adjoint());
    inst.total_power = 1.0;
    inst.users.push_back({inst.w1, 0.0});
    const Solution sol = solve(inst);
    CHECK(sol.capacity_nats == 0.0);
    CHECK(max_abs(sol.covariance.mat()) == 0.0);
    CHECK(worst_residual(sol.kkt) <= 1e-9);
    CHECK(sol.duals.mu2[0] > 0.0);
  }
  SUBCASE("zero cap forces signaling into the user's null space") {
    ProblemInstance inst = instance2(Cmat::Identity(2, 2), 1.0);
    inst.users.push_back({HermitianMatrix(diag2(1.0, 0.0)), 0.0});
    const Solution sol = solve(inst);
    CHECK(std::abs(sol.capacity_nats - std::log(2.0)) <= 1e-9);
    CHECK(max_abs(sol.covariance.mat() - diag2(0.0, 1.0)) <= 1e-9);
    CHECK(interference_power(inst, sol.covariance, 0) <= 1e-12);
  }
  SUBCASE("zero cap user among active ones") {
    ProblemInstance inst;
    inst.w1 = HermitianMatrix(Cmat::Identity(3, 3));
    inst.total_power = 2.0;
    Cmat z = Cmat::Zero(3, 3);
    z(0, 0) = 1.0;
    inst.users.push_back({HermitianMatrix(z), 0.0});
    Cmat w = Cmat::Zero(3, 3);
    w(1, 1) = 1.0;
    inst.users.push_back({HermitianMatrix(w), 0.3});
    const Solution sol = solve(inst);
    CHECK(is_feasible(inst, sol.covariance).feasible);
    CHECK(interference_power(inst, sol.covariance, 0) <= 1e-10);
    // capacity of the reduced 2-dim problem with one cap
    const Solution ref = [&] {
      ProblemInstance red = instance2(Cmat::Identity(2, 2), 2.0);
      red.users.push_back({HermitianMatrix(diag2(1.0, 0.0)), 0.3});
      return solve(red);
    }();
    CHECK(std::abs(sol.capacity_nats - ref.capacity_nats) <= 1e-8);
  }
  SUBCASE("special-case tags agree with the general path") {
    ProblemInstance inst = instance2(Cmat::Identity(2, 2), 4.0);
    inst.users.push_back({HermitianMatrix(diag2(1.0, 2.0)), 3.0});
    const Solution fast = solve(inst);
    const Solution general = solve_general(inst);
    CHECK(fast.method == SolveMethod::kProp4);
    CHECK(general.method == SolveMethod::kGeneral);
    CHECK(std::abs(fast.capacity_nats - general.capacity_nats) <= 1e-6);
  }
  SUBCASE("dead channel") {
    ProblemInstance inst = instance2(Cmat::Zero(2, 2), 1.0);
    inst.users.push_back({HermitianMatrix::Identity(2), 1.0});
    const Solution sol = solve(inst);
    CHECK(sol.capacity_nats == 0.0);
  }
}

TEST_CASE("kkt_residuals") {
  SUBCASE("clean on the water-filling fixture") {
    ProblemInstance inst = instance2(diag2(4.0, 1.0), 1.0);
    DualVariables d;
    d.mu1 = 1.0 / 1.125;
    const KktResiduals kkt = kkt_residuals(inst, HermitianMatrix(diag2(0.875, 0.125)), d);
    CHECK(worst_residual(kkt) <= 1e-10);
  }
  SUBCASE("flags a perturbed covariance") {
    ProblemInstance inst = instance2(diag2(4.0, 1.0), 1.0);
    DualVariables d;
    d.mu1 = 1.0 / 1.125;
    Cmat r = diag2(0.875, 0.125) + 0.1 * Cmat::Identity(2, 2);
    r *= 1.0 / r.trace().real();  // renormalize to the power budget
    const KktResiduals kkt = kkt_residuals(inst, HermitianMatrix(r), d);
    CHECK(kkt.stationarity > 1e-3);
  }
  SUBCASE("zero solution with certifying duals is exact") {
    Cvec u(2);
    u << 1.0, 0.0;
    ProblemInstance inst;
    inst.w1 = HermitianMatrix(u * u.adjoint());
    inst.total_power = 1.0;
    inst.users.push_back({inst.w1, 0.0});
    DualVariables d;
    d.mu2 = {1.5};  // any c >= lambda1 certifies
    const KktResiduals kkt = kkt_residuals(inst, HermitianMatrix::Zero(2), d);
    CHECK(kkt.stationarity == 0.0);
    CHECK(kkt.primal_feas == 0.0);
    CHECK(kkt.dual_feas >= -1e-15);
  }
  SUBCASE("dimension mismatch") {
    ProblemInstance inst = instance2(Cmat::Identity(2, 2), 1.0);
    DualVariables d;
    d.mu1 = 1.0;
    CHECK_THROWS_AS(kkt_residuals(inst, HermitianMatrix::Identity(3), d), std::invalid_argument);
  }
}

TEST_CASE("capacity equals the dual spectrum formula on converged runs") {
  // sum of ln(lambda) over the modes of Wm^+ W1 Wm^+ above 1 must match the
  // reported capacity whenever the multiplier matrix is full rank.
  std::mt19937 rng(43);
  int checked = 0;
  for (int trial = 0; trial < 12 && checked < 6; ++trial) {
    ProblemInstance inst = random_instance(rng, 3, 2);
    for (auto& u : inst.users) u.cap = std::max(u.cap, 0.1);
    const Solution sol = solve_general(inst);
    if (sol.method != SolveMethod::kGeneral) continue;
    Cmat wm2 = sol.duals.mu1 * Cmat::Identity(3, 3);
    for (size_t k = 0; k < inst.users.size(); ++k) wm2 += sol.duals.mu2[k] * inst.users[k].w2.mat();
    const HermitianMatrix wm2h(wm2);
    if (rank_eps(wm2h) < 3) continue;
    const HermitianMatrix wd = pinv(sqrt_psd(wm2h));
    const auto ed = eigh(HermitianMatrix(wd.mat() * inst.w1.mat() * wd.mat()));
    double cap = 0.0;
    for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
      if (ed.eigenvalues[i] > 1.0) cap += std::log(ed.eigenvalues[i]);
    }
    CHECK(std::abs(cap - sol.capacity_nats) <= 1e-8 * std::max(1.0, sol.capacity_nats));
    ++checked;
  }
  CHECK(checked > 0);
}

TEST_CASE("solver map is monotone in the budgets") {
  std::mt19937 rng(44);
  for (int trial = 0; trial < 4; ++trial) {
    ProblemInstance inst = random_instance(rng, 3, 1);
    inst.users[0].cap = 0.5;
    double prev = -1.0;
    for (double pt : {0.5, 1.0, 2.0, 4.0}) {
      inst.total_power = pt;
      const double c = solve(inst).capacity_nats;
      CHECK(c >= prev - 1e-9);
      prev = c;
    }
    prev = -1.0;
    inst.total_power = 2.0;
    for (double cap : {0.1, 0.3, 1.0, 3.0}) {
      inst.users[0].cap = cap;
      const double c = solve(inst).capacity_nats;
      CHECK(c >= prev - 1e-9);
      prev = c;
    }
  }
}

TEST_CASE("solutions dominate random feasible covariances") {
  std::mt19937 rng(45);
  for (int trial = 0; trial < 6; ++trial) {
    ProblemInstance inst = random_instance(rng, 3, 2);
    for (auto& u : inst.users) u.cap = std::max(u.cap, 0.05);
    const Solution sol = solve(inst);
    for (int draw = 0; draw < 5; ++draw) {
      const HermitianMatrix rnd = sharecap::testing::random_feasible_covariance(rng, inst);
      REQUIRE(is_feasible(inst, rnd).feasible);
      CHECK(sol.capacity_nats >= mutual_information(inst, rnd) - 1e-8);
    }
  }
}

TEST_CASE("positive multipliers pin their constraints") {
  std::mt19937 rng(46);
  for (int trial = 0; trial < 6; ++trial) {
    ProblemInstance inst = random_instance(rng, 3, 2);
    for (auto& u : inst.users) u.cap = std::max(u.cap, 0.05);
    const Solution sol = solve(inst);
    if (sol.duals.mu1 > 1e-8) {
      CHECK(std::abs(sol.covariance.trace_real() - inst.total_power) <=
            1e-6 * std::max(1.0, inst.total_power));
    }
    for (size_t k = 0; k < inst.users.size(); ++k) {
      if (sol.duals.mu2[k] > 1e-8) {
        CHECK(std::abs(interference_power(inst, sol.covariance, static_cast<int>(k)) -
                       inst.users[k].cap) <= 1e-6 * std::max(1.0, inst.users[k].cap));
      }
    }
  }
}

TEST_CASE("capacity matches the log-det objective") {
  std::mt19937 rng(47);
  const Tolerances tol;
  for (int trial = 0; trial < 6; ++trial) {
    ProblemInstance inst = random_instance(rng, 4, 1 + trial % 3);
    const Solution sol = solve(inst);
    CHECK(std::abs(sol.capacity_nats - mutual_information(inst, sol.covariance)) <=
          tol.recon(4) * std::max(1.0, sol.capacity_nats));
  }
}

}  // TEST_SUITE
