// SPDX-License-Identifier: Apache-2.0
//
// Closed-form and dual-search solvers for the capacity problem. The optimal
// covariance for fixed multipliers (mu1, mu2k) is
//
//   R(mu) = Wm^+ (I - Wm W1^-1 Wm)_+ Wm^+,   Wm = (mu1 I + sum_k mu2k W2k)^(1/2)
//
// evaluated without forming W1^-1: eigendecompose M = Wm^+ W1 Wm^+ and keep
// the modes with eigenvalue above 1. The multipliers themselves are found by
// complementary-slackness bisection (single user) or projected subgradient
// descent on the dual plus an active-set Newton polish (several users).

#pragma once

#include <utility>

#include "sharecap/problem.hpp"

namespace sharecap {

struct DualSearchSettings {
  int max_iters = 4000;          // subgradient iteration cap (several users)
  double residual_tol = 1e-8;    // complementary-slackness / feasibility target
  enum class StepRule { kPolyak, kDiminishing };
  StepRule step_rule = StepRule::kPolyak;
  double mu_upper_bound = 1e14;  // hard ceiling for multiplier bracketing
  Tolerances tol;
};

// Water-filling against the direct channel only (interference caps ignored).
// W1 = 0 yields the zero solution.
Solution waterfilling(const HermitianMatrix& w1, double total_power,
                      const Tolerances& tol = {});

// Maximizer of the Lagrangian at fixed multipliers (formula above).
// Throws SolverError if all multipliers vanish, or if mu1 = 0 leaves
// null(sum mu2k W2k) not contained in null(W1) (no finite maximizer).
HermitianMatrix covariance_for_duals(const ProblemInstance& inst, const DualVariables& duals,
                                     const Tolerances& tol = {});

// Finds multipliers satisfying complementary slackness and returns them with
// the finished solution. Pre: capacity is not identically zero (dispatching
// between the zero regime and this routine is solve()'s job).
std::pair<DualVariables, Solution> dual_search(const ProblemInstance& inst,
                                               const DualSearchSettings& settings = {});

// Full pipeline: zero-capacity shortcut, water-filling when the caps are
// slack, single-user closed forms when their preconditions hold, dual search
// otherwise. Every returned solution carries a fresh KKT audit.
Solution solve(const ProblemInstance& inst, const DualSearchSettings& settings = {});

// Like solve() but skipping the single-user closed forms; used for
// cross-checking them against the dual search.
Solution solve_general(const ProblemInstance& inst, const DualSearchSettings& settings = {});

// Optimality audit for any (R, duals) pair: recovers the PSD slack
// M = mu1 I + sum_k mu2k W2k - (I + W1 R)^-1 W1 and reports
//   stationarity   max-abs entry of M R,
//   comp_slack_*   |mu * constraint slack|, normalized by max(1, cap),
//   dual_feas      most-negative eigenvalue of M (>= -eps for valid pairs),
//   primal_feas    largest constraint excess of R.
KktResiduals kkt_residuals(const ProblemInstance& inst, const HermitianMatrix& r,
                           const DualVariables& duals, const Tolerances& tol = {});

// Assembles a Solution (capacity, activity flags, KKT audit) from a
// covariance/duals pair produced by any of the solver paths.
Solution finalize_solution(const ProblemInstance& inst, const HermitianMatrix& r,
                           const DualVariables& duals, SolveMethod method,
                           const Tolerances& tol = {});

}  // namespace sharecap
