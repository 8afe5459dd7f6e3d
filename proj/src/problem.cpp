// SPDX-License-Identifier: Apache-2.0

#include "sharecap/problem.hpp"

#include <cmath>
#include <sstream>

namespace sharecap {

void validate_instance(const ProblemInstance& inst, const Tolerances& tol) {
  if (inst.dim() == 0) {
    throw std::invalid_argument("instance: W1 must be non-empty");
  }
  if (!(inst.total_power > 0.0)) {
    throw std::invalid_argument("instance: total_power must be positive");
  }
  if (!is_psd(inst.w1, tol)) {
    throw std::invalid_argument("instance: W1 is not positive semidefinite");
  }
  for (size_t k = 0; k < inst.users.size(); ++k) {
    std::ostringstream who;
    who << "instance: user " << k;
    if (inst.users[k].w2.dim() != inst.dim()) {
      throw std::invalid_argument(who.str() + ": W2 dimension mismatch");
    }
    if (!(inst.users[k].cap >= 0.0)) {
      throw std::invalid_argument(who.str() + ": interference cap must be >= 0");
    }
    if (!is_psd(inst.users[k].w2, tol)) {
      throw std::invalid_argument(who.str() + ": W2 is not positive semidefinite");
    }
  }
}

HermitianMatrix gram_from_channel(const Cmat& h) {
  if (h.rows() == 0 || h.cols() == 0) {
    throw std::invalid_argument("gram_from_channel: channel matrix is empty");
  }
  return HermitianMatrix(h.adjoint() * h);
}

double mutual_information(const ProblemInstance& inst, const HermitianMatrix& r,
                          const Tolerances& tol) {
  if (r.dim() != inst.dim()) {
    throw std::invalid_argument("mutual_information: R dimension mismatch");
  }
  if (!is_psd(r, tol)) {
    throw std::invalid_argument("mutual_information: R is not positive semidefinite");
  }
  const HermitianMatrix w1h = sqrt_psd(inst.w1, tol);
  const HermitianMatrix prod(w1h.mat() * r.mat() * w1h.mat());
  const EigenDecomposition ed = eigh(prod);
  double nats = 0.0;
  for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
    nats += std::log1p(std::max(0.0, ed.eigenvalues[i]));
  }
  return nats;
}

double interference_power(const ProblemInstance& inst, const HermitianMatrix& r, int k) {
  if (k < 0 || k >= inst.num_users()) {
    throw std::out_of_range("interference_power: user index out of range");
  }
  return (inst.users[static_cast<size_t>(k)].w2.mat() * r.mat()).trace().real();
}

FeasibilityReport is_feasible(const ProblemInstance& inst, const HermitianMatrix& r,
                              const Tolerances& tol) {
  FeasibilityReport report;
  const EigenDecomposition ed = eigh(r);
  const double lam_max = ed.eigenvalues.size() ? ed.eigenvalues.maxCoeff() : 0.0;
  const double psd_allow = tol.psd_eps * std::max(lam_max, 1.0);
  const double lam_min = ed.eigenvalues.size() ? ed.eigenvalues.minCoeff() : 0.0;
  if (lam_min < -psd_allow) {
    report.violations.push_back({"psd", -lam_min});
  }
  const double tp = r.trace_real() - inst.total_power;
  if (tp > tol.feas_tol * std::max(1.0, inst.total_power)) {
    report.violations.push_back({"tpc", tp});
  }
  for (int k = 0; k < inst.num_users(); ++k) {
    const double cap = inst.users[static_cast<size_t>(k)].cap;
    const double ip = interference_power(inst, r, k) - cap;
    if (ip > tol.feas_tol * std::max(1.0, cap)) {
      std::ostringstream name;
      name << "ipc[" << k << "]";
      report.violations.push_back({name.str(), ip});
    }
  }
  report.feasible = report.violations.empty();
  return report;
}

ProblemInstance aggregate_total_ipc(const ProblemInstance& inst, double total_cap) {
  if (inst.users.empty()) {
    throw std::invalid_argument("aggregate_total_ipc: instance has no users");
  }
  if (!(total_cap >= 0.0)) {
    throw std::invalid_argument("aggregate_total_ipc: total cap must be >= 0");
  }
  Cmat sum = Cmat::Zero(inst.dim(), inst.dim());
  for (const auto& u : inst.users) sum += u.w2.mat();
  ProblemInstance out;
  out.w1 = inst.w1;
  out.total_power = inst.total_power;
  out.users = {InterferenceUser{HermitianMatrix(sum), total_cap}};
  return out;
}

std::string to_string(SolveMethod m) {
  switch (m) {
    case SolveMethod::kWaterfilling: return "waterfilling";
    case SolveMethod::kGeneral: return "general";
    case SolveMethod::kProp4: return "prop4";
    case SolveMethod::kProp5: return "prop5";
    case SolveMethod::kProp7Case1: return "prop7-case1";
    case SolveMethod::kProp7Case2: return "prop7-case2";
    case SolveMethod::kProp7Case3: return "prop7-case3";
    case SolveMethod::kOracle: return "oracle";
  }
  return "general";
}

}  // namespace sharecap
