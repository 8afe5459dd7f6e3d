// SPDX-License-Identifier: Apache-2.0
//
// Problem data for the shared-spectrum capacity problem:
//
//   maximize    log det(I + W1 R)                     (nats)
//   subject to  R >= 0,
//               tr(R) <= total_power,                 (transmit power)
//               tr(W2k R) <= users[k].cap  for all k  (per-user interference)
//
// W1 is the transmitter->receiver Gram matrix, W2k the transmitter->user-k
// Gram matrix, and the noise is white with unit variance.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sharecap/linalg.hpp"

namespace sharecap {

struct InterferenceUser {
  HermitianMatrix w2;  // Gram matrix of the channel towards the protected user
  double cap = 0.0;    // interference power cap, >= 0
};

struct ProblemInstance {
  HermitianMatrix w1;
  std::vector<InterferenceUser> users;
  double total_power = 0.0;

  Eigen::Index dim() const { return w1.dim(); }
  int num_users() const { return static_cast<int>(users.size()); }
};

// Validates dimensions, total_power > 0, caps >= 0 and PSD-ness of all Gram
// matrices. Throws std::invalid_argument with a field-specific message.
void validate_instance(const ProblemInstance& inst, const Tolerances& tol = {});

// W = H^H H for a channel matrix H (rows = receive antennas at the far end,
// cols = transmit antennas). H must be non-empty.
HermitianMatrix gram_from_channel(const Cmat& h);

// log det(I + W1 R) evaluated through the eigenvalues of the symmetrized
// product W1^(1/2) R W1^(1/2); R must be PSD within tolerance.
double mutual_information(const ProblemInstance& inst, const HermitianMatrix& r,
                          const Tolerances& tol = {});

// tr(W2k R) for user index k (0-based); throws std::out_of_range.
double interference_power(const ProblemInstance& inst, const HermitianMatrix& r, int k);

struct ConstraintViolation {
  std::string constraint;  // "psd", "tpc" or "ipc[k]"
  double excess = 0.0;
};

struct FeasibilityReport {
  bool feasible = true;
  std::vector<ConstraintViolation> violations;
};

// Checks R against the PSD cone and every trace constraint within feas_tol.
FeasibilityReport is_feasible(const ProblemInstance& inst, const HermitianMatrix& r,
                              const Tolerances& tol = {});

// Collapses all interference constraints into a single one on the aggregate
// Gram matrix sum_k W2k with the caller-supplied total cap. Requires K >= 1.
ProblemInstance aggregate_total_ipc(const ProblemInstance& inst, double total_cap);

// Lagrange multipliers: mu1 for the power constraint, mu2[k] per user.
struct DualVariables {
  double mu1 = 0.0;
  std::vector<double> mu2;
};

// Residual groups of the optimality system, see kkt_residuals() in solver.hpp.
struct KktResiduals {
  double stationarity = 0.0;             // max|M R| with M the recovered slack
  double comp_slack_tpc = 0.0;           // |mu1 (tr R - P_T)| / max(1, P_T)
  std::vector<double> comp_slack_ipc;    // per user, normalized the same way
  double dual_feas = 0.0;                // most-negative eigenvalue of M
  double primal_feas = 0.0;              // largest constraint excess
};

enum class SolveMethod {
  kWaterfilling,
  kGeneral,
  kProp4,
  kProp5,
  kProp7Case1,
  kProp7Case2,
  kProp7Case3,
  kOracle,
};

std::string to_string(SolveMethod m);

struct Solution {
  HermitianMatrix covariance;
  double capacity_nats = 0.0;
  DualVariables duals;
  bool tpc_active = false;
  std::vector<bool> ipc_active;
  KktResiduals kkt;
  SolveMethod method = SolveMethod::kGeneral;
};

}  // namespace sharecap
