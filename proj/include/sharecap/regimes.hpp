// SPDX-License-Identifier: Apache-2.0
//
// Structural analysis of a problem instance (how capacity behaves as the
// budgets grow) and single-user closed-form solvers for three geometries:
// full-rank channel with full-rank interference in the interference-limited
// window, full-rank channel with a rank-one interferer, and a rank-one
// channel with an arbitrary interferer.

#pragma once

#include <optional>

#include "sharecap/problem.hpp"

namespace sharecap {

struct RegimeReport {
  // Capacity grows without bound as total_power -> inf (some null direction
  // of the aggregate interference Gram matrix is visible to the receiver).
  bool unbounded_growth = false;
  // Capacity is exactly zero: some caps are zero and their combined
  // zero-forcing null space is invisible to the receiver.
  bool zero_capacity = false;
  // The power constraint can go slack at large budgets (null containment).
  bool tpc_redundancy_possible = false;
  // rank(W1) > rank(sum_k W2k): positive capacity for every cap choice.
  bool favorable_rank = false;
  // Finite upper bound on capacity (present iff growth is bounded).
  std::optional<double> capacity_upper_bound_nats;
  // Unit direction certifying unbounded growth (present iff unbounded).
  std::optional<Cvec> certifying_vector;
};

RegimeReport classify(const ProblemInstance& inst, const Tolerances& tol = {});

// Single user, W1 and W2 both full rank, interference cap inside the window
// where the power constraint is slack and the optimal covariance is
// mu2^-1 W2^-1 - W1^-1 (full rank). Returns nullopt when outside the window
// or within the 1e-9 boundary guard.
std::optional<Solution> solve_full_rank_interference_limited(const ProblemInstance& inst,
                                                             const Tolerances& tol = {});

// Single user, W1 full rank, W2 = lambda2 u2 u2^H rank one. Covers the
// water-filling branch (cap above the water-filling interference) and the
// both-constraints-tight branch R = mu1^-1 I - W1^-1 - alpha u2 u2^H.
std::optional<Solution> solve_rank1_interferer(const ProblemInstance& inst,
                                               const Tolerances& tol = {});

// Single user, W1 = lambda1 u1 u1^H rank one; beamforming is optimal. Three
// cases depending on cap/total_power relative to the thresholds
//   gamma1 = (u1^H W2^+ u1) / (u1^H (W2^+)^2 u1),  gamma2 = u1^H W2 u1.
std::optional<Solution> solve_rank1_channel(const ProblemInstance& inst,
                                            const Tolerances& tol = {});

// rank(R) <= rank(W1) within the shared rank tolerance.
bool check_rank_bound(const ProblemInstance& inst, const Solution& sol,
                      const Tolerances& tol = {});

}  // namespace sharecap
