// SPDX-License-Identifier: Apache-2.0

#include "sharecap/io.hpp"

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

namespace sharecap {

namespace {

using nlohmann::json;

// Largest Hermitian deviation accepted from an explicit Gram-matrix input.
// Anything worse is a malformed file, not roundoff.
constexpr double kHermitianInputTol = 1e-6;

json complex_to_json(const Complex& z) { return json::array({z.real(), z.imag()}); }

Complex complex_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    throw ParseError(where + ": expected a [re, im] pair");
  }
  return Complex(j[0].get<double>(), j[1].get<double>());
}

json matrix_to_json(const Cmat& a) {
  json out = json::array();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index k = 0; k < a.cols(); ++k) out.push_back(complex_to_json(a(i, k)));
  }
  return out;
}

// Flat row-major [re, im] list with `cols` known; the row count is inferred.
Cmat matrix_from_json(const json& j, Eigen::Index cols, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of [re, im] pairs");
  const auto total = static_cast<Eigen::Index>(j.size());
  if (cols <= 0 || total == 0 || total % cols != 0) {
    throw ParseError(where + ": entry count " + std::to_string(total) +
                     " is not a positive multiple of m = " + std::to_string(cols));
  }
  const Eigen::Index rows = total / cols;
  Cmat a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index k = 0; k < cols; ++k) {
      a(i, k) = complex_from_json(j[static_cast<std::size_t>(i * cols + k)], where);
    }
  }
  return a;
}

double number_field(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ParseError(where + ": missing numeric field \"" + key + "\"");
  }
  return j.at(key).get<double>();
}

// "W*" must be m x m and Hermitian up to input tolerance; "H*" is any n x m
// channel whose Gram H'H we form ourselves (Hermitian by construction).
HermitianMatrix gram_field(const json& j, const std::string& w_key, const std::string& h_key,
                           Eigen::Index m, const std::string& where) {
  const bool has_w = j.contains(w_key);
  const bool has_h = j.contains(h_key);
  if (has_w == has_h) {
    throw ParseError(where + ": exactly one of \"" + w_key + "\" or \"" + h_key +
                     "\" must be present");
  }
  if (has_w) {
    const Cmat a = matrix_from_json(j.at(w_key), m, where + "." + w_key);
    if (a.rows() != m) {
      throw ParseError(where + "." + w_key + ": expected a square " + std::to_string(m) + "x" +
                       std::to_string(m) + " matrix");
    }
    const double dev = (a - a.adjoint()).cwiseAbs().maxCoeff();
    if (dev > kHermitianInputTol) {
      throw ParseError(where + "." + w_key + ": matrix is not Hermitian (deviation " +
                       std::to_string(dev) + ")");
    }
    return HermitianMatrix(a);
  }
  return gram_from_channel(matrix_from_json(j.at(h_key), m, where + "." + h_key));
}

json kkt_to_json(const KktResiduals& kkt) {
  json out;
  out["stationarity"] = kkt.stationarity;
  out["comp_slack_tpc"] = kkt.comp_slack_tpc;
  out["comp_slack_ipc"] = kkt.comp_slack_ipc;
  out["dual_feas"] = kkt.dual_feas;
  out["primal_feas"] = kkt.primal_feas;
  return out;
}

KktResiduals kkt_from_json(const json& j) {
  KktResiduals kkt;
  kkt.stationarity = number_field(j, "stationarity", "kkt_residuals");
  kkt.comp_slack_tpc = number_field(j, "comp_slack_tpc", "kkt_residuals");
  kkt.dual_feas = number_field(j, "dual_feas", "kkt_residuals");
  kkt.primal_feas = number_field(j, "primal_feas", "kkt_residuals");
  if (!j.contains("comp_slack_ipc") || !j.at("comp_slack_ipc").is_array()) {
    throw ParseError("kkt_residuals: missing array field \"comp_slack_ipc\"");
  }
  for (const auto& v : j.at("comp_slack_ipc")) {
    if (!v.is_number()) throw ParseError("kkt_residuals.comp_slack_ipc: expected numbers");
    kkt.comp_slack_ipc.push_back(v.get<double>());
  }
  return kkt;
}

}  // namespace

ProblemInstance instance_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("instance: expected a JSON object");
  if (!j.contains("m") || !j.at("m").is_number_integer()) {
    throw ParseError("instance: missing integer field \"m\"");
  }
  const auto m = j.at("m").get<Eigen::Index>();
  if (m <= 0) throw ParseError("instance: \"m\" must be positive");

  ProblemInstance inst;
  inst.total_power = number_field(j, "P_T", "instance");
  inst.w1 = gram_field(j, "W1", "H1", m, "instance");

  if (!j.contains("users") || !j.at("users").is_array()) {
    throw ParseError("instance: missing array field \"users\"");
  }
  std::size_t k = 0;
  for (const auto& uj : j.at("users")) {
    const std::string where = "instance.users[" + std::to_string(k++) + "]";
    if (!uj.is_object()) throw ParseError(where + ": expected an object");
    InterferenceUser user;
    user.w2 = gram_field(uj, "W2", "H2", m, where);
    user.cap = number_field(uj, "P_I", where);
    inst.users.push_back(std::move(user));
  }

  if (j.contains("total_ipc")) {
    if (!j.at("total_ipc").is_number()) {
      throw ParseError("instance: \"total_ipc\" must be a number");
    }
    inst = aggregate_total_ipc(inst, j.at("total_ipc").get<double>());
  }
  return inst;
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return instance_from_json(j);
}

json instance_to_json(const ProblemInstance& inst) {
  json j;
  j["m"] = inst.dim();
  j["P_T"] = inst.total_power;
  j["W1"] = matrix_to_json(inst.w1.mat());
  j["users"] = json::array();
  for (const auto& u : inst.users) {
    json uj;
    uj["W2"] = matrix_to_json(u.w2.mat());
    uj["P_I"] = u.cap;
    j["users"].push_back(std::move(uj));
  }
  return j;
}

json solution_to_json(const Solution& sol, const RegimeReport& regime) {
  json j;
  j["capacity_nats"] = sol.capacity_nats;
  j["capacity_bits"] = sol.capacity_nats / std::log(2.0);
  j["R"] = matrix_to_json(sol.covariance.mat());
  j["duals"] = {{"mu1", sol.duals.mu1}, {"mu2", sol.duals.mu2}};
  j["active_constraints"] = {{"tpc", sol.tpc_active}, {"ipc", sol.ipc_active}};
  j["kkt_residuals"] = kkt_to_json(sol.kkt);
  j["method"] = to_string(sol.method);
  j["regime"] = regime_to_json(regime);
  return j;
}

StoredSolution solution_from_json(const json& j) {
  if (!j.is_object()) throw ParseError("solution: expected a JSON object");
  StoredSolution stored;
  stored.capacity_nats = number_field(j, "capacity_nats", "solution");
  if (!j.contains("R")) throw ParseError("solution: missing field \"R\"");
  const json& r = j.at("R");
  // R is square; recover the dimension from the entry count.
  const auto total = static_cast<Eigen::Index>(r.size());
  const auto m = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(total))));
  if (m <= 0 || m * m != total) {
    throw ParseError("solution.R: entry count " + std::to_string(total) + " is not a square");
  }
  stored.covariance = HermitianMatrix(matrix_from_json(r, m, "solution.R"));
  if (!j.contains("duals") || !j.at("duals").is_object()) {
    throw ParseError("solution: missing object field \"duals\"");
  }
  stored.duals.mu1 = number_field(j.at("duals"), "mu1", "solution.duals");
  if (!j.at("duals").contains("mu2") || !j.at("duals").at("mu2").is_array()) {
    throw ParseError("solution.duals: missing array field \"mu2\"");
  }
  for (const auto& v : j.at("duals").at("mu2")) {
    if (!v.is_number()) throw ParseError("solution.duals.mu2: expected numbers");
    stored.duals.mu2.push_back(v.get<double>());
  }
  if (j.contains("kkt_residuals")) stored.kkt = kkt_from_json(j.at("kkt_residuals"));
  if (j.contains("method") && j.at("method").is_string()) {
    stored.method = j.at("method").get<std::string>();
  }
  return stored;
}

json regime_to_json(const RegimeReport& report) {
  json j;
  j["unbounded_growth"] = report.unbounded_growth;
  j["zero_capacity"] = report.zero_capacity;
  j["tpc_redundancy_possible"] = report.tpc_redundancy_possible;
  j["favorable_rank"] = report.favorable_rank;
  if (report.capacity_upper_bound_nats) {
    j["capacity_upper_bound_nats"] = *report.capacity_upper_bound_nats;
  }
  if (report.certifying_vector) {
    json v = json::array();
    for (Eigen::Index i = 0; i < report.certifying_vector->size(); ++i) {
      v.push_back(complex_to_json((*report.certifying_vector)[i]));
    }
    j["certifying_vector"] = std::move(v);
  }
  return j;
}

}  // namespace sharecap
