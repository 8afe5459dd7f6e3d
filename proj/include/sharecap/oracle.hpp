// SPDX-License-Identifier: Apache-2.0
//
// Independent reference solvers used to validate the closed forms. Both stay
// deliberately free of the dual/KKT machinery: one climbs the concave
// objective directly with projected gradient ascent, the other grids the 2x2
// feasible set.

#pragma once

#include "sharecap/problem.hpp"

namespace sharecap {

struct OracleSettings {
  int max_iters = 8000;       // gradient ascent iteration cap
  double step0 = 1.0;         // initial step, adapted by backtracking
  double tol = 1e-12;         // relative objective improvement stop
  // Cycles of the feasible-set projection. This is the accuracy-limiting
  // knob: an under-converged projection biases the ascent fixed point, and
  // no amount of extra gradient iterations recovers it. Cheap cases break
  // out early on the in-loop movement test.
  int dykstra_iters = 400;
  int grid_points = 50;       // per axis for the 2x2 grid search
};

// Projected gradient ascent with Nesterov-style momentum. The feasible-set
// projection runs Dykstra cycles over the PSD cone interleaved with the trace
// half-spaces; the reported iterate is re-polished until feasible. Duals are
// estimated from the active constraints afterwards (least squares), purely
// for reporting.
Solution oracle_projected_gradient(const ProblemInstance& inst,
                                   const OracleSettings& settings = {},
                                   const Tolerances& tol = {});

// Exhaustive search for dim == 2: R = [[a, c+id], [c-id, b]] with a, b on a
// grid of [0, total_power], the off-diagonal disc |c+id|^2 <= a b gridded per
// cell, followed by one coordinate-descent refinement at a tenth of the grid
// resolution. Throws std::invalid_argument for other dimensions.
Solution oracle_bruteforce_2x2(const ProblemInstance& inst,
                               const OracleSettings& settings = {},
                               const Tolerances& tol = {});

struct ComparisonReport {
  double capacity_gap = 0.0;        // |capacity_a - capacity_b|
  double max_covariance_diff = 0.0; // max-abs entry difference
  bool a_feasible = false;
  bool b_feasible = false;
  bool pass = false;                // gap <= tol and both feasible
};

ComparisonReport compare(const ProblemInstance& inst, const Solution& a, const Solution& b,
                         double capacity_tol, const Tolerances& tol = {});

}  // namespace sharecap
