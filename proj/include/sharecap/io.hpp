// SPDX-License-Identifier: Apache-2.0
//
// JSON instance/solution files and regime reports. Complex matrices are
// encoded row-major as arrays of [re, im] pairs. Instances accept either a
// Gram matrix ("W1"/"W2") or a raw channel matrix ("H1"/"H2") per link.

#pragma once

#include <string>

#include <nlohmann/json_fwd.hpp>

#include "sharecap/problem.hpp"
#include "sharecap/regimes.hpp"

namespace sharecap {

// Schema violations (wrong types, lengths, non-Hermitian W inputs) throw
// ParseError; value-level problems (non-PSD Grams, total_power <= 0) are left
// to validate_instance.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Instance schema:
//   {
//     "m": 2,                     dimension (transmit antennas)
//     "P_T": 1.0,                 total transmit power, > 0
//     "W1": [[re,im] x m*m]       or "H1": [[re,im] x n*m]  (exactly one)
//     "users": [ {"W2": ... or "H2": ..., "P_I": 1.0}, ... ]
//     "total_ipc": 2.0            optional: replace the per-user caps with a
//                                 single aggregate constraint at this cap
//     "name", "seed"              optional metadata, ignored
//   }
ProblemInstance instance_from_json(const nlohmann::json& j);
ProblemInstance load_instance(const std::string& path);
nlohmann::json instance_to_json(const ProblemInstance& inst);

nlohmann::json solution_to_json(const Solution& sol, const RegimeReport& regime);
// Reads back "R" and "duals" (plus capacity/method) for re-auditing.
struct StoredSolution {
  HermitianMatrix covariance;
  DualVariables duals;
  double capacity_nats = 0.0;
  KktResiduals kkt;
  std::string method;
};
StoredSolution solution_from_json(const nlohmann::json& j);

nlohmann::json regime_to_json(const RegimeReport& report);

}  // namespace sharecap
