// SPDX-License-Identifier: Apache-2.0
//
// Python bindings: numpy-friendly access to the instance model, the solver
// pipeline, the regime classifiers and the reference maximizers.

#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sharecap/oracle.hpp"
#include "sharecap/problem.hpp"
#include "sharecap/regimes.hpp"
#include "sharecap/solver.hpp"

namespace py = pybind11;
using namespace sharecap;

namespace {

ProblemInstance make_instance(const Cmat& w1, double total_power,
                              const std::vector<std::pair<Cmat, double>>& users) {
  ProblemInstance inst;
  inst.w1 = HermitianMatrix(w1);
  inst.total_power = total_power;
  for (const auto& [w2, cap] : users) inst.users.push_back({HermitianMatrix(w2), cap});
  validate_instance(inst);
  return inst;
}

py::dict solution_dict(const Solution& sol) {
  py::dict kkt;
  kkt["stationarity"] = sol.kkt.stationarity;
  kkt["comp_slack_tpc"] = sol.kkt.comp_slack_tpc;
  kkt["comp_slack_ipc"] = sol.kkt.comp_slack_ipc;
  kkt["dual_feas"] = sol.kkt.dual_feas;
  kkt["primal_feas"] = sol.kkt.primal_feas;

  py::dict d;
  d["R"] = sol.covariance.mat();
  d["capacity_nats"] = sol.capacity_nats;
  d["capacity_bits"] = sol.capacity_nats / std::log(2.0);
  d["mu1"] = sol.duals.mu1;
  d["mu2"] = sol.duals.mu2;
  d["tpc_active"] = sol.tpc_active;
  d["ipc_active"] = sol.ipc_active;
  d["kkt"] = std::move(kkt);
  d["method"] = to_string(sol.method);
  return d;
}

py::dict regime_dict(const RegimeReport& rep) {
  py::dict d;
  d["unbounded_growth"] = rep.unbounded_growth;
  d["zero_capacity"] = rep.zero_capacity;
  d["tpc_redundancy_possible"] = rep.tpc_redundancy_possible;
  d["favorable_rank"] = rep.favorable_rank;
  d["capacity_upper_bound_nats"] =
      rep.capacity_upper_bound_nats ? py::cast(*rep.capacity_upper_bound_nats) : py::none();
  d["certifying_vector"] =
      rep.certifying_vector ? py::cast(*rep.certifying_vector) : py::none();
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() =
      "Capacity and optimal transmit covariance of a Gaussian vector channel "
      "under a total power constraint and per-user interference caps";

  py::class_<ProblemInstance>(m, "Instance")
      .def(py::init(&make_instance), py::arg("w1"), py::arg("total_power"),
           py::arg("users") = std::vector<std::pair<Cmat, double>>{},
           "Build an instance from the receiver Gram matrix, the power budget "
           "and a list of (user Gram matrix, interference cap) pairs")
      .def_property_readonly("m", &ProblemInstance::dim)
      .def_property_readonly("num_users", &ProblemInstance::num_users)
      .def_property_readonly("total_power",
                             [](const ProblemInstance& inst) { return inst.total_power; })
      .def_property_readonly("w1",
                             [](const ProblemInstance& inst) { return inst.w1.mat(); })
      .def("user_gram",
           [](const ProblemInstance& inst, int k) { return inst.users.at(k).w2.mat(); })
      .def("user_cap", [](const ProblemInstance& inst, int k) { return inst.users.at(k).cap; });

  m.def(
      "solve",
      [](const ProblemInstance& inst) { return solution_dict(solve(inst)); },
      py::arg("instance"), "Full pipeline: closed forms when applicable, dual search otherwise");
  m.def(
      "solve_general",
      [](const ProblemInstance& inst) { return solution_dict(solve_general(inst)); },
      py::arg("instance"), "Dual search only (skips the single-user closed forms)");
  m.def(
      "waterfilling",
      [](const Cmat& w1, double total_power) {
        return solution_dict(waterfilling(HermitianMatrix(w1), total_power));
      },
      py::arg("w1"), py::arg("total_power"),
      "Classical water-filling against the direct channel only");
  m.def(
      "classify",
      [](const ProblemInstance& inst) { return regime_dict(classify(inst)); },
      py::arg("instance"), "Growth/zero-capacity/redundancy classification");
  m.def(
      "mutual_information",
      [](const ProblemInstance& inst, const Cmat& r) {
        return mutual_information(inst, HermitianMatrix(r));
      },
      py::arg("instance"), py::arg("r"), "log det(I + W1 R) in nats");
  m.def(
      "kkt_residuals",
      [](const ProblemInstance& inst, const Cmat& r, double mu1, std::vector<double> mu2) {
        DualVariables duals{mu1, std::move(mu2)};
        const KktResiduals kkt = kkt_residuals(inst, HermitianMatrix(r), duals);
        py::dict d;
        d["stationarity"] = kkt.stationarity;
        d["comp_slack_tpc"] = kkt.comp_slack_tpc;
        d["comp_slack_ipc"] = kkt.comp_slack_ipc;
        d["dual_feas"] = kkt.dual_feas;
        d["primal_feas"] = kkt.primal_feas;
        return d;
      },
      py::arg("instance"), py::arg("r"), py::arg("mu1"), py::arg("mu2"),
      "Optimality audit of a covariance/multiplier pair");
  m.def(
      "oracle",
      [](const ProblemInstance& inst, const std::string& kind) {
        const Solution sol = kind == "grid" ? oracle_bruteforce_2x2(inst)
                                            : oracle_projected_gradient(inst);
        return solution_dict(sol);
      },
      py::arg("instance"), py::arg("kind") = "pg",
      "Reference maximizer: projected gradient ('pg') or 2x2 grid ('grid')");
}
