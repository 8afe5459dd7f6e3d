// SPDX-License-Identifier: Apache-2.0

#include "sharecap/regimes.hpp"

#include <cmath>

#include "sharecap/solver.hpp"

namespace sharecap {

namespace {

// Relative guard around closed-form validity windows: instances this close
// to a boundary go to the general solver instead.
constexpr double kBoundaryGuard = 1e-9;

double lambda_max(const HermitianMatrix& a) {
  const EigenDecomposition ed = eigh(a);
  return ed.eigenvalues.size() ? ed.eigenvalues.maxCoeff() : 0.0;
}

double real_quadratic(const Cvec& u, const Cmat& a) {
  return (u.adjoint() * a * u)(0, 0).real();
}

// Verified assembly shared by the closed forms: reject anything that is not
// feasible or does not pass the optimality audit.
std::optional<Solution> audited(const ProblemInstance& inst, const Cmat& r,
                                const DualVariables& duals, SolveMethod method,
                                const Tolerances& tol) {
  const HermitianMatrix rh(r);
  if (!is_feasible(inst, rh, tol).feasible) return std::nullopt;
  Solution sol = finalize_solution(inst, rh, duals, method, tol);
  const double bound = 1e-7 * std::max(1.0, lambda_max(inst.w1));
  double worst = std::max({sol.kkt.stationarity, sol.kkt.comp_slack_tpc, sol.kkt.primal_feas,
                           std::max(0.0, -sol.kkt.dual_feas)});
  for (double v : sol.kkt.comp_slack_ipc) worst = std::max(worst, v);
  if (worst > bound) return std::nullopt;
  return sol;
}

}  // namespace

RegimeReport classify(const ProblemInstance& inst, const Tolerances& tol) {
  validate_instance(inst, tol);
  RegimeReport report;
  const Eigen::Index m = inst.dim();

  if (rank_eps(inst.w1, tol) == 0) {
    // Dead channel: capacity is zero however the caps are set.
    report.zero_capacity = true;
    report.tpc_redundancy_possible = true;
    report.capacity_upper_bound_nats = 0.0;
    return report;
  }

  Cmat sum = Cmat::Zero(m, m);
  for (const auto& u : inst.users) sum += u.w2.mat();
  const HermitianMatrix s(sum);

  const bool contained = nullspace_contained(s, inst.w1, tol);
  report.unbounded_growth = !contained;
  report.tpc_redundancy_possible = contained;
  report.favorable_rank = rank_eps(inst.w1, tol) > rank_eps(s, tol);

  Cmat s0 = Cmat::Zero(m, m);
  bool any_zero_cap = false;
  for (const auto& u : inst.users) {
    if (u.cap <= 0.0) {
      s0 += u.w2.mat();
      any_zero_cap = true;
    }
  }
  report.zero_capacity = any_zero_cap && nullspace_contained(HermitianMatrix(s0), inst.w1, tol);

  if (report.unbounded_growth) {
    // Strongest transmit direction that no protected user can see.
    const EigenDecomposition es = eigh(s);
    const double cutoff =
        tol.rank_eps * std::max(es.eigenvalues.size() ? es.eigenvalues.cwiseAbs().maxCoeff() : 0.0,
                                1.0);
    Cmat proj = Cmat::Zero(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (std::abs(es.eigenvalues[i]) <= cutoff) {
        proj += es.eigenvectors.col(i) * es.eigenvectors.col(i).adjoint();
      }
    }
    const EigenDecomposition ep = eigh(HermitianMatrix(proj * inst.w1.mat() * proj));
    Cvec witness = ep.eigenvectors.col(0);
    witness.normalize();
    report.certifying_vector = witness;
  } else {
    // Finite growth: all transmit power must pass through directions the
    // users can see, capping the rate by the weakest visible mode.
    double cap_sum = 0.0;
    for (const auto& u : inst.users) cap_sum += u.cap;
    const EigenDecomposition es = eigh(s);
    const double cutoff =
        tol.rank_eps * std::max(es.eigenvalues.cwiseAbs().maxCoeff(), 1.0);
    double lam_min_pos = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (es.eigenvalues[i] > cutoff) lam_min_pos = es.eigenvalues[i];
    }
    const double w1_max = lambda_max(inst.w1);
    report.capacity_upper_bound_nats =
        lam_min_pos > 0.0
            ? static_cast<double>(m) * std::log1p(w1_max * cap_sum / lam_min_pos)
            : 0.0;
  }
  return report;
}

std::optional<Solution> solve_full_rank_interference_limited(const ProblemInstance& inst,
                                                             const Tolerances& tol) {
  validate_instance(inst, tol);
  if (inst.num_users() != 1) return std::nullopt;
  const Eigen::Index m = inst.dim();
  if (rank_eps(inst.w1, tol) < m || rank_eps(inst.users[0].w2, tol) < m) return std::nullopt;

  const HermitianMatrix w1i = pinv(inst.w1, tol);
  const HermitianMatrix w2i = pinv(inst.users[0].w2, tol);
  const double cross_trace = (inst.users[0].w2.mat() * w1i.mat()).trace().real();
  const HermitianMatrix w1i_h = sqrt_psd(w1i, tol);
  const double lam1 =
      lambda_max(HermitianMatrix(w1i_h.mat() * inst.users[0].w2.mat() * w1i_h.mat()));
  const double cap = inst.users[0].cap;

  const double lower = static_cast<double>(m) * lam1 - cross_trace;
  const double upper = static_cast<double>(m) / w2i.trace_real() *
                           (inst.total_power + w1i.trace_real()) -
                       cross_trace;
  const double guard = kBoundaryGuard * std::max({1.0, std::abs(lower), std::abs(upper)});
  if (!(cap > lower + guard && cap <= upper - guard)) return std::nullopt;

  const double mu2 = static_cast<double>(m) / (cap + cross_trace);
  const Cmat r = (1.0 / mu2) * w2i.mat() - w1i.mat();
  DualVariables duals;
  duals.mu1 = 0.0;
  duals.mu2 = {mu2};
  return audited(inst, r, duals, SolveMethod::kProp4, tol);
}

std::optional<Solution> solve_rank1_interferer(const ProblemInstance& inst,
                                               const Tolerances& tol) {
  validate_instance(inst, tol);
  if (inst.num_users() != 1) return std::nullopt;
  const Eigen::Index m = inst.dim();
  if (rank_eps(inst.w1, tol) < m || rank_eps(inst.users[0].w2, tol) != 1) return std::nullopt;

  const EigenDecomposition e2 = eigh(inst.users[0].w2);
  const double lam2 = e2.eigenvalues[0];
  const Cvec u2 = e2.eigenvectors.col(0);
  const HermitianMatrix w1i = pinv(inst.w1, tol);
  const double tr_w1i = w1i.trace_real();
  const double u2w1iu2 = real_quadratic(u2, w1i.mat());
  const double lam_w1i_max = lambda_max(w1i);
  const double md = static_cast<double>(m);
  const double cap = inst.users[0].cap;
  const double pt = inst.total_power;

  // Interference produced by full-rank water-filling; above it the cap is
  // slack and water-filling stands.
  const double cap_threshold = lam2 * (pt + tr_w1i) / md - lam2 * u2w1iu2;
  const bool wf_full_rank = pt > md * lam_w1i_max - tr_w1i;
  const double guard = kBoundaryGuard * std::max(1.0, std::abs(cap_threshold));

  if (cap >= cap_threshold + guard) {
    if (!wf_full_rank) return std::nullopt;
    const double level = (pt + tr_w1i) / md;
    const Cmat r = level * Cmat::Identity(m, m) - w1i.mat();
    DualVariables duals;
    duals.mu1 = 1.0 / level;
    duals.mu2 = {0.0};
    return audited(inst, r, duals, SolveMethod::kProp5, tol);
  }

  const double lower = lam2 * lam_w1i_max - lam2 * u2w1iu2;
  const double pt_needed = md * cap / lam2 + md * u2w1iu2 - tr_w1i;
  const double guard_lo = kBoundaryGuard * std::max(1.0, std::abs(lower));
  if (!(cap > lower + guard_lo && cap < cap_threshold - guard &&
        pt > pt_needed + kBoundaryGuard * std::max(1.0, std::abs(pt_needed)))) {
    return std::nullopt;
  }
  const double mu1 = (md - 1.0) / (pt - cap / lam2 - u2w1iu2 + tr_w1i);
  const double mu2 = 1.0 / (cap + lam2 * u2w1iu2) - mu1 / lam2;
  if (!(mu1 > 0.0) || !(mu2 > 0.0)) return std::nullopt;
  const double alpha = 1.0 / mu1 - 1.0 / (mu1 + lam2 * mu2);
  const Cmat r = (1.0 / mu1) * Cmat::Identity(m, m) - w1i.mat() - alpha * (u2 * u2.adjoint());
  DualVariables duals;
  duals.mu1 = mu1;
  duals.mu2 = {mu2};
  return audited(inst, r, duals, SolveMethod::kProp5, tol);
}

std::optional<Solution> solve_rank1_channel(const ProblemInstance& inst, const Tolerances& tol) {
  validate_instance(inst, tol);
  if (inst.num_users() != 1) return std::nullopt;
  if (rank_eps(inst.w1, tol) != 1) return std::nullopt;
  const Eigen::Index m = inst.dim();

  const EigenDecomposition e1 = eigh(inst.w1);
  const double lam1 = e1.eigenvalues[0];
  const Cvec u1 = e1.eigenvectors.col(0);
  const Cmat& w2 = inst.users[0].w2.mat();
  const double pt = inst.total_power;
  const double cap = inst.users[0].cap;

  const double gamma2 = real_quadratic(u1, w2);
  const double w2_scale = std::max(1.0, lambda_max(inst.users[0].w2));

  const auto case2 = [&]() -> std::optional<Solution> {
    const Cmat r = pt * (u1 * u1.adjoint());
    DualVariables duals;
    duals.mu1 = lam1 / (1.0 + lam1 * pt);
    duals.mu2 = {0.0};
    return audited(inst, r, duals, SolveMethod::kProp7Case2, tol);
  };

  // Degenerate geometry: the beamforming direction is invisible to the user.
  if ((w2 * u1).norm() <= tol.rank_eps * w2_scale) return case2();

  const double gamma_i = cap / pt;
  const double guard2 = kBoundaryGuard * std::max(1.0, gamma2);
  if (gamma_i >= gamma2 + guard2) return case2();
  if (gamma_i > gamma2 - guard2) return std::nullopt;  // boundary: general solver

  const HermitianMatrix w2p = pinv(inst.users[0].w2, tol);
  const Cvec v = w2p.mat() * u1;
  const double beta = (u1.adjoint() * v)(0, 0).real();
  // Component of the beam outside the user's range space: if present, the
  // power constraint can never go slack and the cap-only closed form is out.
  const double off_range = (u1 - w2 * w2p.mat() * u1).norm();
  const bool in_range = off_range <= 1e-8;

  if (in_range && beta > 0.0) {
    const double gamma1 = beta / v.squaredNorm();
    const double guard1 = kBoundaryGuard * std::max(1.0, gamma1);
    if (gamma_i < gamma1 - guard1) {
      const Cmat r = (cap / beta) * (v * v.adjoint());
      DualVariables duals;
      duals.mu1 = 0.0;
      duals.mu2 = {lam1 * beta / (1.0 + lam1 * beta * cap)};
      return audited(inst, r, duals, SolveMethod::kProp7Case1, tol);
    }
    if (gamma_i < gamma1 + guard1) return std::nullopt;  // boundary: general solver
  }

  // Both constraints tight: scale the penalty on the user channel until the
  // interference of the power-saturating beam meets the cap.
  const Cmat identity = Cmat::Identity(m, m);
  const auto beam_interference = [&](double nu) {
    const Cmat w = (identity + nu * w2).llt().solve(u1);
    const Cmat r = pt * (w * w.adjoint()) / w.squaredNorm();
    return (w2 * r).trace().real();
  };
  double hi = 1.0;
  int guard_iter = 0;
  while (beam_interference(hi) > cap && guard_iter++ < 300) hi *= 2.0;
  if (beam_interference(hi) > cap) return std::nullopt;
  double lo = 0.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (beam_interference(mid) > cap) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
  }
  const double nu = hi;
  const Cmat g = (identity + nu * w2).llt().solve(identity);
  const Cvec gu1 = g * u1;
  const double quad = (u1.adjoint() * gu1)(0, 0).real();
  if (!(quad > 0.0)) return std::nullopt;
  const double lam_tilde = lam1 * quad;
  const double mu1 = 1.0 / (1.0 / lam_tilde + pt * quad / gu1.squaredNorm());
  const Cmat r = pt * (gu1 * gu1.adjoint()) / gu1.squaredNorm();
  DualVariables duals;
  duals.mu1 = mu1;
  duals.mu2 = {nu * mu1};
  return audited(inst, r, duals, SolveMethod::kProp7Case3, tol);
}

bool check_rank_bound(const ProblemInstance& inst, const Solution& sol, const Tolerances& tol) {
  return rank_eps(sol.covariance, tol) <= rank_eps(inst.w1, tol);
}

}  // namespace sharecap
