// SPDX-License-Identifier: Apache-2.0

#include "sharecap/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "sharecap/log.hpp"
#include "sharecap/regimes.hpp"

namespace sharecap {

namespace {

constexpr double kMu1Floor = 1e-14;  // clamp when mu1 = 0 is structurally impossible

double lambda_max(const HermitianMatrix& a) {
  const EigenDecomposition ed = eigh(a);
  return ed.eigenvalues.size() ? ed.eigenvalues.maxCoeff() : 0.0;
}

// Smallest eigenvalue above the rank cutoff (0 if none).
double lambda_min_pos(const HermitianMatrix& a, const Tolerances& tol) {
  const EigenDecomposition ed = eigh(a);
  const double lam_max = ed.eigenvalues.size() ? ed.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = tol.rank_eps * std::max(lam_max, 1.0);
  double out = 0.0;
  for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
    if (ed.eigenvalues[i] > cutoff) out = ed.eigenvalues[i];
  }
  return out;
}

// Gradient of log det(I + W1 R) at R, in its Hermitian form
// W1^(1/2) (I + W1^(1/2) R W1^(1/2))^-1 W1^(1/2).
Cmat capacity_gradient(const Cmat& w1h, const Cmat& r) {
  const Eigen::Index m = r.rows();
  const Cmat s = Cmat::Identity(m, m) + w1h * r * w1h;
  const Cmat g = w1h * s.llt().solve(w1h);
  return 0.5 * (g + g.adjoint());
}

struct LagrangianMax {
  Cmat r;                 // maximizer of the Lagrangian at the given duals
  double capacity = 0.0;  // log det objective at r (sum of log active modes)
};

// Optimal covariance for fixed multipliers: whiten by
// Wm = (mu1 I + sum mu2k W2k)^(1/2), keep the modes of Wm^+ W1 Wm^+ whose
// eigenvalue exceeds 1, weight them by (1 - 1/lambda), and unwhiten. When Wm
// is singular this reproduces the range-restricted solve with the off-range
// blocks at zero, which requires null(Wm^2) to be invisible to W1.
LagrangianMax lagrangian_maximizer(const ProblemInstance& inst, const DualVariables& duals,
                                   const Tolerances& tol) {
  const Eigen::Index m = inst.dim();
  Cmat wm2 = duals.mu1 * Cmat::Identity(m, m);
  for (size_t k = 0; k < inst.users.size(); ++k) {
    const double mu = k < duals.mu2.size() ? duals.mu2[k] : 0.0;
    if (mu != 0.0) wm2 += mu * inst.users[k].w2.mat();
  }
  const EigenDecomposition ew = eigh(HermitianMatrix(wm2));
  const double lam_max = ew.eigenvalues.size() ? ew.eigenvalues.maxCoeff() : 0.0;
  if (lam_max <= 0.0) {
    throw SolverError("covariance_for_duals: all multipliers are zero");
  }
  const double cutoff = tol.rank_eps * std::max(lam_max, 1.0);

  // A positive power multiplier makes the weight matrix strictly positive
  // definite no matter how the user terms overlap: every eigenvalue is at
  // least mu1. The computed spectrum can still dip below that (or below the
  // rank cutoff) through round-off when mu1 is tiny next to the user terms,
  // so clamp from below instead of misreading the matrix as singular.
  Rvec inv_sqrt = Rvec::Zero(m);
  bool singular = false;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (duals.mu1 > 0.0) {
      inv_sqrt[i] = 1.0 / std::sqrt(std::max(ew.eigenvalues[i], duals.mu1));
    } else if (ew.eigenvalues[i] > cutoff) {
      inv_sqrt[i] = 1.0 / std::sqrt(ew.eigenvalues[i]);
    } else {
      singular = true;
    }
  }
  if (singular) {
    // Without the power multiplier the Lagrangian is unbounded along any
    // direction that carries rate but no penalty; reject those geometries.
    const double w1_max = lambda_max(inst.w1);
    const double bound = tol.rank_eps * (1.0 + w1_max);
    for (Eigen::Index i = 0; i < m; ++i) {
      if (ew.eigenvalues[i] > cutoff) continue;
      if ((inst.w1.mat() * ew.eigenvectors.col(i)).norm() > bound) {
        throw SolverError(
            "covariance_for_duals: zero power multiplier is inconsistent (an "
            "unpenalized direction carries rate)");
      }
    }
  }
  const Cmat wd = ew.eigenvectors * inv_sqrt.asDiagonal() * ew.eigenvectors.adjoint();
  const Cmat mw = 0.5 * (wd * inst.w1.mat() * wd + (wd * inst.w1.mat() * wd).adjoint());
  const EigenDecomposition em = eigh(HermitianMatrix(mw));

  LagrangianMax out;
  Rvec weights = Rvec::Zero(m);
  out.capacity = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (em.eigenvalues[i] > 1.0) {
      weights[i] = 1.0 - 1.0 / em.eigenvalues[i];
      out.capacity += std::log(em.eigenvalues[i]);
    }
  }
  const Cmat core = em.eigenvectors * weights.asDiagonal() * em.eigenvectors.adjoint();
  const Cmat r = wd * core * wd;
  out.r = 0.5 * (r + r.adjoint());
  return out;
}

struct DualEval {
  LagrangianMax lm;
  double tpc_slack = 0.0;             // P_T - tr(R)
  std::vector<double> ipc_slack;      // P_Ik - tr(W2k R)
};

DualEval eval_duals(const ProblemInstance& inst, const DualVariables& duals,
                    const Tolerances& tol) {
  DualEval ev;
  ev.lm = lagrangian_maximizer(inst, duals, tol);
  ev.tpc_slack = inst.total_power - ev.lm.r.trace().real();
  for (const auto& u : inst.users) {
    ev.ipc_slack.push_back(u.cap - (u.w2.mat() * ev.lm.r).trace().real());
  }
  return ev;
}

double dual_value(const ProblemInstance& inst, const DualVariables& duals, const DualEval& ev) {
  double g = ev.lm.capacity + duals.mu1 * ev.tpc_slack;
  for (size_t k = 0; k < inst.users.size(); ++k) {
    g += (k < duals.mu2.size() ? duals.mu2[k] : 0.0) * ev.ipc_slack[k];
  }
  return g;
}

// Exactly-feasible shrink of a PSD candidate (trace constraints scale
// linearly); used to keep a primal lower bound during the dual search.
double feasible_value(const ProblemInstance& inst, const Cmat& w1h, const Cmat& r) {
  double scale = 1.0;
  const double tr = r.trace().real();
  if (tr > inst.total_power && tr > 0.0) scale = std::min(scale, inst.total_power / tr);
  for (const auto& u : inst.users) {
    const double ip = (u.w2.mat() * r).trace().real();
    if (ip > u.cap) scale = std::min(scale, ip > 0.0 ? u.cap / ip : 0.0);
  }
  scale = std::max(scale, 0.0);
  Eigen::SelfAdjointEigenSolver<Cmat> es(w1h * (scale * r) * w1h);
  double nats = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    nats += std::log1p(std::max(0.0, es.eigenvalues()[i]));
  }
  return nats;
}

struct Brackets {
  double mu1_hi = 0.0;
  std::vector<double> mu2_hi;
};

Brackets dual_brackets(const ProblemInstance& inst, const DualSearchSettings& settings) {
  Brackets b;
  const double w1_max = lambda_max(inst.w1);
  b.mu1_hi = std::min(std::max(w1_max * 1.0001, 1e-6), settings.mu_upper_bound);
  for (const auto& u : inst.users) {
    const double lmin = lambda_min_pos(u.w2, settings.tol);
    const double hi = w1_max / std::max(lmin, settings.tol.rank_eps);
    b.mu2_hi.push_back(std::min(std::max(hi * 1.0001, 1e-6), settings.mu_upper_bound));
  }
  return b;
}

bool complementarity_ok(const ProblemInstance& inst, const DualVariables& duals,
                        const DualEval& ev, double residual_tol, double feas_tol) {
  const double pt_scale = std::max(1.0, inst.total_power);
  if (ev.tpc_slack < -feas_tol * pt_scale) return false;
  if (std::abs(duals.mu1 * ev.tpc_slack) > residual_tol * pt_scale) return false;
  for (size_t k = 0; k < inst.users.size(); ++k) {
    const double cap_scale = std::max(1.0, inst.users[k].cap);
    if (ev.ipc_slack[k] < -feas_tol * cap_scale) return false;
    const double mu = k < duals.mu2.size() ? duals.mu2[k] : 0.0;
    if (std::abs(mu * ev.ipc_slack[k]) > residual_tol * cap_scale) return false;
  }
  return true;
}

// Bisection for the multiplier of one constraint, all others held fixed.
// slack(mu_i) is nondecreasing in mu_i (convexity of the dual), so the sign
// brackets cleanly: returns mu_i with slack ~ 0, or 0 when the constraint is
// already slack there. `eval` must return the slack of that constraint.
double coordinate_root(const std::function<double(double)>& slack_at, double lo_start,
                       double hi_start, double hi_cap, double target_tol) {
  double lo = lo_start;
  double slo = slack_at(lo);
  if (slo >= 0.0) return lo;
  double hi = std::max(hi_start, lo * 2.0 + 1e-12);
  double shi = slack_at(hi);
  int guard = 0;
  while (shi < 0.0 && hi < hi_cap && guard++ < 200) {
    hi *= 2.0;
    shi = slack_at(hi);
  }
  if (shi < 0.0) return hi;  // best effort at the ceiling
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double smid = slack_at(mid);
    if (std::abs(smid) <= target_tol) return mid;
    if (smid < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
  }
  return hi;  // the feasible side of the bracket
}

DualVariables zero_duals(const ProblemInstance& inst) {
  DualVariables d;
  d.mu2.assign(static_cast<size_t>(inst.num_users()), 0.0);
  return d;
}

// Single-user search: inner bisection enforces the interference cap for a
// given mu1, outer bisection enforces the power budget. tr(R) is
// nonincreasing in mu1 and tr(W2 R) nonincreasing in mu2, both consequences
// of dual convexity.
DualVariables nested_bisection_k1(const ProblemInstance& inst, const DualSearchSettings& settings) {
  const Brackets brackets = dual_brackets(inst, settings);
  const Tolerances& tol = settings.tol;
  const double cap = inst.users[0].cap;
  const double inner_tol = 1e-12 * std::max(1.0, cap);
  const double outer_tol = 1e-12 * std::max(1.0, inst.total_power);

  const auto inner = [&](double mu1) -> DualVariables {
    DualVariables d = zero_duals(inst);
    d.mu1 = mu1;
    if (mu1 > 0.0) {
      const DualEval ev0 = eval_duals(inst, d, tol);
      if (ev0.ipc_slack[0] >= 0.0) return d;  // cap already satisfied
    }
    double lo = 0.0;
    if (mu1 == 0.0) {
      // mu2 must stay positive; find a violated starting point.
      lo = 1e-8 * brackets.mu2_hi[0];
      for (int i = 0; i < 40; ++i) {
        d.mu2[0] = lo;
        if (eval_duals(inst, d, tol).ipc_slack[0] < 0.0) break;
        lo *= 0.01;
        if (lo < 1e-280) break;
      }
      d.mu2[0] = lo;
      if (eval_duals(inst, d, tol).ipc_slack[0] >= 0.0) return d;
    }
    d.mu2[0] = coordinate_root(
        [&](double mu2) {
          DualVariables probe = d;
          probe.mu2[0] = mu2;
          return eval_duals(inst, probe, tol).ipc_slack[0];
        },
        lo, brackets.mu2_hi[0], settings.mu_upper_bound, inner_tol);
    return d;
  };

  // Try the power constraint going slack first (mu1 = 0), which is only
  // structurally possible when null(W2) is invisible to W1.
  if (nullspace_contained(inst.users[0].w2, inst.w1, tol)) {
    DualVariables d0 = inner(0.0);
    if (d0.mu1 > 0.0 || d0.mu2[0] > 0.0) {
      const DualEval ev = eval_duals(inst, d0, tol);
      if (ev.tpc_slack >= -tol.feas_tol * std::max(1.0, inst.total_power)) return d0;
    }
  }

  // Power constraint active: bisect mu1.
  double lo = kMu1Floor;
  DualVariables dlo = inner(lo);
  if (eval_duals(inst, dlo, tol).tpc_slack >= 0.0) return dlo;
  double hi = brackets.mu1_hi;
  DualVariables dhi = inner(hi);
  int guard = 0;
  while (eval_duals(inst, dhi, tol).tpc_slack < 0.0 && hi < settings.mu_upper_bound &&
         guard++ < 100) {
    hi *= 2.0;
    dhi = inner(hi);
  }
  DualVariables best = dhi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    DualVariables dm = inner(mid);
    const double slack = eval_duals(inst, dm, tol).tpc_slack;
    if (std::abs(slack) <= outer_tol) return dm;
    if (slack < 0.0) {
      lo = mid;
    } else {
      hi = mid;
      best = dm;
    }
    if (hi - lo <= 1e-16 * std::max(1.0, hi)) break;
  }
  return best;
}

// Active-set Newton polish of the complementarity system: drive the slacks
// of the constraints with positive multipliers to zero. Jacobian by forward
// differences; multipliers clipped at zero drop out of the active set.
bool newton_polish(const ProblemInstance& inst, const DualSearchSettings& settings,
                   DualVariables* duals) {
  const Tolerances& tol = settings.tol;
  const int n = 1 + inst.num_users();
  const auto get = [&](const DualVariables& d, int i) {
    return i == 0 ? d.mu1 : d.mu2[static_cast<size_t>(i - 1)];
  };
  const auto set = [&](DualVariables* d, int i, double v) {
    if (i == 0) {
      d->mu1 = v;
    } else {
      d->mu2[static_cast<size_t>(i - 1)] = v;
    }
  };
  const auto slack = [&](const DualEval& ev, int i) {
    return i == 0 ? ev.tpc_slack : ev.ipc_slack[static_cast<size_t>(i - 1)];
  };
  const auto scale = [&](int i) {
    return std::max(1.0, i == 0 ? inst.total_power : inst.users[static_cast<size_t>(i - 1)].cap);
  };

  std::vector<int> active;
  {
    DualEval ev = eval_duals(inst, *duals, tol);
    for (int i = 0; i < n; ++i) {
      if (get(*duals, i) > 1e-12 || slack(ev, i) < -tol.feas_tol * scale(i)) active.push_back(i);
    }
  }
  if (active.empty()) return false;

  for (int reshape = 0; reshape < 2 * n + 2; ++reshape) {
    bool converged = false;
    for (int step = 0; step < 60; ++step) {
      DualEval ev;
      try {
        ev = eval_duals(inst, *duals, tol);
      } catch (const SolverError&) {
        return false;
      }
      double worst = 0.0;
      for (int i : active) worst = std::max(worst, std::abs(slack(ev, i)) / scale(i));
      if (worst <= 1e-12) {
        converged = true;
        break;
      }
      const Eigen::Index na = static_cast<Eigen::Index>(active.size());
      Eigen::MatrixXd jac(na, na);
      Eigen::VectorXd f(na);
      for (Eigen::Index c = 0; c < na; ++c) {
        f[c] = slack(ev, active[static_cast<size_t>(c)]);
      }
      for (Eigen::Index c = 0; c < na; ++c) {
        const int i = active[static_cast<size_t>(c)];
        const double h = std::max(1e-7 * get(*duals, i), 1e-10);
        DualVariables probe = *duals;
        set(&probe, i, get(*duals, i) + h);
        DualEval evp;
        try {
          evp = eval_duals(inst, probe, tol);
        } catch (const SolverError&) {
          return false;
        }
        for (Eigen::Index rr = 0; rr < na; ++rr) {
          jac(rr, c) = (slack(evp, active[static_cast<size_t>(rr)]) - f[rr]) / h;
        }
      }
      const Eigen::VectorXd dx = jac.fullPivLu().solve(-f);
      if (!dx.allFinite()) return false;
      double alpha = 1.0;
      DualVariables next = *duals;
      for (int damp = 0; damp < 30; ++damp) {
        next = *duals;
        for (Eigen::Index c = 0; c < na; ++c) {
          const int i = active[static_cast<size_t>(c)];
          set(&next, i, std::max(0.0, get(*duals, i) + alpha * dx[c]));
        }
        try {
          DualEval evn = eval_duals(inst, next, tol);
          double worst_next = 0.0;
          for (int i : active) worst_next = std::max(worst_next, std::abs(slack(evn, i)) / scale(i));
          if (worst_next < worst || alpha < 1e-4) break;
        } catch (const SolverError&) {
        }
        alpha *= 0.5;
      }
      *duals = next;
    }
    if (!converged) return false;

    // Re-examine the working set: drop multipliers pinned at zero, add
    // constraints that went violated.
    DualEval ev = eval_duals(inst, *duals, tol);
    bool changed = false;
    std::vector<int> next_active;
    for (int i : active) {
      if (get(*duals, i) <= 0.0 && slack(ev, i) > tol.feas_tol * scale(i)) {
        changed = true;  // pinned at the boundary and strictly slack: inactive
      } else {
        next_active.push_back(i);
      }
    }
    for (int i = 0; i < n; ++i) {
      const bool in = std::find(next_active.begin(), next_active.end(), i) != next_active.end();
      if (!in && slack(ev, i) < -tol.feas_tol * scale(i)) {
        next_active.push_back(i);
        changed = true;
      }
    }
    if (!changed) {
      return complementarity_ok(inst, *duals, ev, settings.residual_tol, tol.feas_tol);
    }
    std::sort(next_active.begin(), next_active.end());
    active = next_active;
    if (active.empty()) return false;
  }
  return false;
}

// Cyclic coordinate minimization of the dual: each multiplier is driven to
// the zero of its own slack (or to zero if already slack). Used as a
// fallback engine when the subgradient pass stalls.
DualVariables coordinate_sweeps(const ProblemInstance& inst, const DualSearchSettings& settings,
                                DualVariables start, int sweeps) {
  const Brackets brackets = dual_brackets(inst, settings);
  const Tolerances& tol = settings.tol;
  DualVariables d = start;
  if (d.mu2.size() != inst.users.size()) d.mu2.assign(inst.users.size(), 0.0);
  const int n = 1 + inst.num_users();
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    for (int i = 0; i < n; ++i) {
      const auto slack_at = [&](double v) {
        DualVariables probe = d;
        if (i == 0) {
          probe.mu1 = v;
        } else {
          probe.mu2[static_cast<size_t>(i - 1)] = v;
        }
        try {
          const DualEval ev = eval_duals(inst, probe, tol);
          return i == 0 ? ev.tpc_slack : ev.ipc_slack[static_cast<size_t>(i - 1)];
        } catch (const SolverError&) {
          return -1.0;  // treat an invalid point as violated, pushing v up
        }
      };
      const double cap_i = i == 0 ? inst.total_power : inst.users[static_cast<size_t>(i - 1)].cap;
      const double hi = i == 0 ? brackets.mu1_hi : brackets.mu2_hi[static_cast<size_t>(i - 1)];
      const double v = coordinate_root(slack_at, 0.0, hi, settings.mu_upper_bound,
                                       1e-12 * std::max(1.0, cap_i));
      if (i == 0) {
        d.mu1 = v;
      } else {
        d.mu2[static_cast<size_t>(i - 1)] = v;
      }
    }
    try {
      const DualEval ev = eval_duals(inst, d, tol);
      if (complementarity_ok(inst, d, ev, settings.residual_tol, tol.feas_tol)) break;
    } catch (const SolverError&) {
    }
  }
  return d;
}

// Projected subgradient descent on the dual function, Polyak or diminishing
// steps, with the best feasible primal value as the Polyak target.
DualVariables subgradient_descent(const ProblemInstance& inst, const DualSearchSettings& settings) {
  const Brackets brackets = dual_brackets(inst, settings);
  const Tolerances& tol = settings.tol;
  const Cmat w1h = sqrt_psd(inst.w1, tol).mat();
  const int kusers = inst.num_users();

  DualVariables mu = zero_duals(inst);
  // Start from the pure water-filling multiplier.
  {
    const EigenDecomposition ed = eigh(inst.w1);
    double inv_sum = 0.0;
    int np = 0;
    const double cutoff = tol.rank_eps * std::max(ed.eigenvalues.cwiseAbs().maxCoeff(), 1.0);
    for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
      if (ed.eigenvalues[i] > cutoff) {
        inv_sum += 1.0 / ed.eigenvalues[i];
        ++np;
      }
    }
    mu.mu1 = np > 0 ? std::max(static_cast<double>(np) / (inst.total_power + inv_sum), kMu1Floor)
                    : kMu1Floor;
  }

  DualVariables best = mu;
  double best_primal = 0.0;
  double best_dual = std::numeric_limits<double>::infinity();

  for (int it = 0; it < settings.max_iters; ++it) {
    DualEval ev;
    try {
      ev = eval_duals(inst, mu, tol);
    } catch (const SolverError&) {
      mu.mu1 = std::max(mu.mu1, kMu1Floor);
      ev = eval_duals(inst, mu, tol);
    }
    if (complementarity_ok(inst, mu, ev, settings.residual_tol, tol.feas_tol)) return mu;

    const double primal = feasible_value(inst, w1h, ev.lm.r);
    best_primal = std::max(best_primal, primal);
    const double g = dual_value(inst, mu, ev);
    if (g < best_dual) {
      best_dual = g;
      best = mu;
    }

    Eigen::VectorXd sg(1 + kusers);
    sg[0] = ev.tpc_slack;
    for (int k = 0; k < kusers; ++k) sg[k + 1] = ev.ipc_slack[static_cast<size_t>(k)];
    const double sg_norm2 = sg.squaredNorm();
    if (sg_norm2 <= 0.0) return mu;

    double step;
    if (settings.step_rule == DualSearchSettings::StepRule::kPolyak) {
      step = std::max(g - best_primal, 1e-12) / sg_norm2;
    } else {
      step = brackets.mu1_hi / (std::sqrt(static_cast<double>(it + 1)) * std::sqrt(sg_norm2));
    }
    mu.mu1 = std::max(0.0, mu.mu1 - step * sg[0]);
    for (int k = 0; k < kusers; ++k) {
      mu.mu2[static_cast<size_t>(k)] =
          std::min(std::max(0.0, mu.mu2[static_cast<size_t>(k)] - step * sg[k + 1]),
                   settings.mu_upper_bound);
    }
    mu.mu1 = std::min(mu.mu1, settings.mu_upper_bound);

    // Periodically try to finish with the Newton polish.
    if ((it + 1) % 50 == 0) {
      DualVariables polished = mu;
      if (newton_polish(inst, settings, &polished)) return polished;
    }
  }
  return best;
}

// Zero-forcing reduction: users with a zero cap admit no interference at
// all, so the covariance must live in the common null space of their Gram
// matrices. Projects the instance onto that subspace.
struct ZfReduction {
  Cmat basis;               // m x r, orthonormal columns spanning the null space
  ProblemInstance reduced;  // users with positive caps, projected
  std::vector<size_t> kept; // original indices of the surviving users
};

std::optional<ZfReduction> zero_cap_reduction(const ProblemInstance& inst, const Tolerances& tol) {
  std::vector<size_t> zero_caps;
  for (size_t k = 0; k < inst.users.size(); ++k) {
    if (inst.users[k].cap <= 0.0) zero_caps.push_back(k);
  }
  if (zero_caps.empty()) return std::nullopt;
  const Eigen::Index m = inst.dim();
  Cmat s0 = Cmat::Zero(m, m);
  for (size_t k : zero_caps) s0 += inst.users[k].w2.mat();
  const EigenDecomposition ed = eigh(HermitianMatrix(s0));
  const double cutoff = tol.rank_eps * std::max(ed.eigenvalues.cwiseAbs().maxCoeff(), 1.0);
  std::vector<Eigen::Index> null_idx;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (std::abs(ed.eigenvalues[i]) <= cutoff) null_idx.push_back(i);
  }
  ZfReduction red;
  red.basis = Cmat(m, static_cast<Eigen::Index>(null_idx.size()));
  for (size_t i = 0; i < null_idx.size(); ++i) {
    red.basis.col(static_cast<Eigen::Index>(i)) = ed.eigenvectors.col(null_idx[i]);
  }
  red.reduced.w1 = HermitianMatrix(red.basis.adjoint() * inst.w1.mat() * red.basis);
  red.reduced.total_power = inst.total_power;
  for (size_t k = 0; k < inst.users.size(); ++k) {
    if (inst.users[k].cap <= 0.0) continue;
    red.reduced.users.push_back(
        {HermitianMatrix(red.basis.adjoint() * inst.users[k].w2.mat() * red.basis),
         inst.users[k].cap});
    red.kept.push_back(k);
  }
  return red;
}

// Multiplier for the zero-cap users that certifies optimality: the smallest
// c with base + c * S0 >= 0, found by bisection on the minimum eigenvalue.
double psd_completion_weight(const Cmat& base, const Cmat& s0, double hi_cap) {
  const auto min_eig = [&](double c) {
    Eigen::SelfAdjointEigenSolver<Cmat> es(base + c * s0);
    return es.eigenvalues().minCoeff();
  };
  if (min_eig(0.0) >= -1e-12) return 0.0;
  double hi = 1.0;
  int guard = 0;
  while (min_eig(hi) < -1e-12 && hi < hi_cap && guard++ < 120) hi *= 2.0;
  double lo = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (min_eig(mid) < -1e-12) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

Solution solve_impl(const ProblemInstance& inst, const DualSearchSettings& settings,
                    bool allow_special);

// Handles instances containing zero-cap users (positive capacity case):
// solve inside the zero-forcing subspace, embed back, and complete the
// multipliers of the zero-cap users so the KKT slack stays PSD.
Solution solve_with_zero_caps(const ProblemInstance& inst, const ZfReduction& red,
                              const DualSearchSettings& settings, bool allow_special) {
  const Tolerances& tol = settings.tol;
  const Solution sub = solve_impl(red.reduced, settings, allow_special);
  const Cmat r = red.basis * sub.covariance.mat() * red.basis.adjoint();

  DualVariables duals = zero_duals(inst);
  duals.mu1 = sub.duals.mu1;
  for (size_t i = 0; i < red.kept.size(); ++i) {
    duals.mu2[red.kept[i]] = i < sub.duals.mu2.size() ? sub.duals.mu2[i] : 0.0;
  }
  const Eigen::Index m = inst.dim();
  Cmat s0 = Cmat::Zero(m, m);
  for (size_t k = 0; k < inst.users.size(); ++k) {
    if (inst.users[k].cap <= 0.0) s0 += inst.users[k].w2.mat();
  }
  const Cmat w1h = sqrt_psd(inst.w1, tol).mat();
  Cmat base = duals.mu1 * Cmat::Identity(m, m) - capacity_gradient(w1h, r);
  for (size_t k = 0; k < inst.users.size(); ++k) {
    if (duals.mu2[k] > 0.0) base += duals.mu2[k] * inst.users[k].w2.mat();
  }
  const double c = psd_completion_weight(base, s0, settings.mu_upper_bound);
  for (size_t k = 0; k < inst.users.size(); ++k) {
    if (inst.users[k].cap <= 0.0) duals.mu2[k] = c;
  }
  return finalize_solution(inst, HermitianMatrix(r), duals, sub.method, tol);
}

// Zero capacity: R = 0 with multipliers certifying that no feasible
// direction carries rate. The certificate needs c * S0 >= W1 on the range of
// S0, with S0 the Gram sum of the zero-cap users.
Solution zero_capacity_solution(const ProblemInstance& inst, const Tolerances& tol) {
  const Eigen::Index m = inst.dim();
  DualVariables duals;
  duals.mu2.assign(inst.users.size(), 0.0);
  Cmat s0 = Cmat::Zero(m, m);
  bool any = false;
  for (size_t k = 0; k < inst.users.size(); ++k) {
    if (inst.users[k].cap <= 0.0) {
      s0 += inst.users[k].w2.mat();
      any = true;
    }
  }
  if (any) {
    const HermitianMatrix t = pinv(sqrt_psd(HermitianMatrix(s0), tol), tol);
    const double c =
        std::max(0.0, lambda_max(HermitianMatrix(t.mat() * inst.w1.mat() * t.mat()))) *
            (1.0 + 1e-9) +
        1e-15;
    for (size_t k = 0; k < inst.users.size(); ++k) {
      if (inst.users[k].cap <= 0.0) duals.mu2[k] = c;
    }
  }
  return finalize_solution(inst, HermitianMatrix::Zero(m), duals, SolveMethod::kGeneral, tol);
}

bool kkt_within(const KktResiduals& kkt, const ProblemInstance& inst, double w1_max) {
  const double bound = 1e-7 * std::max(1.0, w1_max);
  double worst = std::max({kkt.stationarity, kkt.comp_slack_tpc, kkt.primal_feas,
                           std::max(0.0, -kkt.dual_feas)});
  for (double v : kkt.comp_slack_ipc) worst = std::max(worst, v);
  (void)inst;
  return worst <= bound;
}

Solution solve_impl(const ProblemInstance& inst, const DualSearchSettings& settings,
                    bool allow_special) {
  const Tolerances& tol = settings.tol;
  validate_instance(inst, tol);
  const double w1_max = lambda_max(inst.w1);

  // Dead channel: nothing to send over.
  if (rank_eps(inst.w1, tol) == 0) {
    return finalize_solution(inst, HermitianMatrix::Zero(inst.dim()), zero_duals(inst),
                             SolveMethod::kWaterfilling, tol);
  }

  const RegimeReport regime = classify(inst, tol);
  if (regime.zero_capacity) {
    return zero_capacity_solution(inst, tol);
  }
  if (const auto red = zero_cap_reduction(inst, tol)) {
    return solve_with_zero_caps(inst, *red, settings, allow_special);
  }

  if (inst.users.empty()) {
    Solution wf = waterfilling(inst.w1, inst.total_power, tol);
    return finalize_solution(inst, wf.covariance, wf.duals, SolveMethod::kWaterfilling, tol);
  }

  if (allow_special && inst.num_users() == 1) {
    if (auto sol = solve_full_rank_interference_limited(inst, tol)) {
      Solution out = finalize_solution(inst, sol->covariance, sol->duals, sol->method, tol);
      if (kkt_within(out.kkt, inst, w1_max)) return out;
      log_info("full-rank closed form failed its audit; falling back");
    }
    if (auto sol = solve_rank1_interferer(inst, tol)) {
      Solution out = finalize_solution(inst, sol->covariance, sol->duals, sol->method, tol);
      if (kkt_within(out.kkt, inst, w1_max)) return out;
      log_info("rank-1 interferer closed form failed its audit; falling back");
    }
    if (auto sol = solve_rank1_channel(inst, tol)) {
      Solution out = finalize_solution(inst, sol->covariance, sol->duals, sol->method, tol);
      if (kkt_within(out.kkt, inst, w1_max)) return out;
      log_info("rank-1 channel closed form failed its audit; falling back");
    }
  }

  // Water-filling solves the unconstrained-interference relaxation; if its
  // output already respects every cap it is optimal.
  {
    Solution wf = waterfilling(inst.w1, inst.total_power, tol);
    if (is_feasible(inst, wf.covariance, tol).feasible) {
      DualVariables duals = zero_duals(inst);
      duals.mu1 = wf.duals.mu1;
      Solution out = finalize_solution(inst, wf.covariance, duals, SolveMethod::kWaterfilling, tol);
      if (kkt_within(out.kkt, inst, w1_max)) return out;
    }
  }

  auto [duals, solution] = dual_search(inst, settings);
  (void)duals;
  return solution;
}

}  // namespace

Solution waterfilling(const HermitianMatrix& w1, double total_power, const Tolerances& tol) {
  if (!(total_power > 0.0)) {
    throw std::invalid_argument("waterfilling: total_power must be positive");
  }
  const Eigen::Index m = w1.dim();
  const EigenDecomposition ed = eigh(w1);
  const double lam_abs = ed.eigenvalues.size() ? ed.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = tol.rank_eps * std::max(lam_abs, 1.0);

  std::vector<double> lam;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (ed.eigenvalues[i] > cutoff) lam.push_back(ed.eigenvalues[i]);  // descending already
  }
  ProblemInstance shell;
  shell.w1 = w1;
  shell.total_power = total_power;

  if (lam.empty()) {
    DualVariables duals;
    return finalize_solution(shell, HermitianMatrix::Zero(m), duals, SolveMethod::kWaterfilling,
                             tol);
  }

  // Active-set descent: fill the strongest n modes to a common water level.
  int n = static_cast<int>(lam.size());
  double level = 0.0;
  for (; n >= 1; --n) {
    double inv_sum = 0.0;
    for (int i = 0; i < n; ++i) inv_sum += 1.0 / lam[static_cast<size_t>(i)];
    level = (total_power + inv_sum) / n;
    if (level > 1.0 / lam[static_cast<size_t>(n - 1)]) break;
  }
  Rvec powers = Rvec::Zero(m);
  double cap_nats = 0.0;
  int filled = 0;
  for (Eigen::Index i = 0; i < m && filled < n; ++i) {
    if (ed.eigenvalues[i] <= cutoff) continue;
    powers[i] = level - 1.0 / ed.eigenvalues[i];
    cap_nats += std::log(ed.eigenvalues[i] * level);
    ++filled;
  }
  const Cmat r = ed.eigenvectors * powers.asDiagonal() * ed.eigenvectors.adjoint();
  DualVariables duals;
  duals.mu1 = 1.0 / level;
  Solution sol = finalize_solution(shell, HermitianMatrix(r), duals, SolveMethod::kWaterfilling,
                                   tol);
  sol.capacity_nats = cap_nats;  // closed form; matches the audit to 1e-14
  return sol;
}

HermitianMatrix covariance_for_duals(const ProblemInstance& inst, const DualVariables& duals,
                                     const Tolerances& tol) {
  validate_instance(inst, tol);
  return HermitianMatrix(lagrangian_maximizer(inst, duals, tol).r);
}

std::pair<DualVariables, Solution> dual_search(const ProblemInstance& inst,
                                               const DualSearchSettings& settings) {
  const Tolerances& tol = settings.tol;
  validate_instance(inst, tol);
  if (settings.max_iters < 1 || !(settings.residual_tol > 0.0)) {
    throw std::invalid_argument("dual_search: settings out of range");
  }
  if (rank_eps(inst.w1, tol) == 0) {
    throw SolverError("dual_search: W1 is zero; nothing to optimize");
  }
  // Zero-cap users are handled by the caller (zero-forcing reduction); keep
  // a direct call safe anyway.
  if (const auto red = zero_cap_reduction(inst, tol)) {
    Solution sol = solve_with_zero_caps(inst, *red, settings, /*allow_special=*/false);
    return {sol.duals, sol};
  }

  DualVariables duals;
  if (inst.users.empty()) {
    Solution wf = waterfilling(inst.w1, inst.total_power, settings.tol);
    duals = wf.duals;
    Solution out = finalize_solution(inst, wf.covariance, duals, SolveMethod::kGeneral, tol);
    return {duals, out};
  }
  const auto general_descent = [&]() {
    DualVariables d = subgradient_descent(inst, settings);
    DualEval ev = eval_duals(inst, d, tol);
    if (!complementarity_ok(inst, d, ev, settings.residual_tol, tol.feas_tol)) {
      DualVariables polished = d;
      if (newton_polish(inst, settings, &polished)) {
        d = polished;
      } else {
        d = coordinate_sweeps(inst, settings, d, 80);
        DualVariables again = d;
        if (newton_polish(inst, settings, &again)) d = again;
      }
    }
    return d;
  };

  if (inst.num_users() == 1) {
    // Fast path; its inner bisection assumes a monotone interference
    // response, so verify the result and fall back to descent if it is off.
    bool nested_ok = false;
    try {
      duals = nested_bisection_k1(inst, settings);
      DualEval ev1 = eval_duals(inst, duals, tol);
      nested_ok = complementarity_ok(inst, duals, ev1, settings.residual_tol, tol.feas_tol);
    } catch (const SolverError& e) {
      log_info(std::string("dual_search: nested bisection failed (") + e.what() + ")");
    }
    if (!nested_ok) duals = general_descent();
  } else {
    duals = general_descent();
  }

  DualEval ev = eval_duals(inst, duals, tol);
  if (!complementarity_ok(inst, duals, ev, settings.residual_tol * 100.0,
                          tol.feas_tol * 100.0)) {
    std::ostringstream msg;
    msg << "dual_search: no convergence in " << settings.max_iters
        << " iterations (tpc slack " << ev.tpc_slack << ", mu1 " << duals.mu1;
    for (size_t k = 0; k < ev.ipc_slack.size(); ++k) {
      msg << ", ipc" << k << " slack " << ev.ipc_slack[k] << " mu2 " << duals.mu2[k];
    }
    msg << ")";
    throw SolverError(msg.str());
  }
  Solution out = finalize_solution(inst, HermitianMatrix(ev.lm.r), duals, SolveMethod::kGeneral,
                                   tol);
  return {duals, out};
}

Solution solve(const ProblemInstance& inst, const DualSearchSettings& settings) {
  return solve_impl(inst, settings, /*allow_special=*/true);
}

Solution solve_general(const ProblemInstance& inst, const DualSearchSettings& settings) {
  return solve_impl(inst, settings, /*allow_special=*/false);
}

KktResiduals kkt_residuals(const ProblemInstance& inst, const HermitianMatrix& r,
                           const DualVariables& duals, const Tolerances& tol) {
  const Eigen::Index m = inst.dim();
  if (r.dim() != m) throw std::invalid_argument("kkt_residuals: R dimension mismatch");
  const Cmat w1h = sqrt_psd(inst.w1, tol).mat();
  Cmat wsum = duals.mu1 * Cmat::Identity(m, m);
  for (size_t k = 0; k < inst.users.size(); ++k) {
    const double mu = k < duals.mu2.size() ? duals.mu2[k] : 0.0;
    wsum += mu * inst.users[k].w2.mat();
  }
  const Cmat slack = wsum - capacity_gradient(w1h, r.mat());
  const Cmat m_recovered = 0.5 * (slack + slack.adjoint());

  KktResiduals out;
  out.stationarity = max_abs(m_recovered * r.mat());
  const double pt_scale = std::max(1.0, inst.total_power);
  out.comp_slack_tpc = std::abs(duals.mu1 * (r.trace_real() - inst.total_power)) / pt_scale;
  double primal = std::max(0.0, r.trace_real() - inst.total_power);
  for (size_t k = 0; k < inst.users.size(); ++k) {
    const double cap = inst.users[k].cap;
    const double ip = (inst.users[k].w2.mat() * r.mat()).trace().real();
    const double mu = k < duals.mu2.size() ? duals.mu2[k] : 0.0;
    out.comp_slack_ipc.push_back(std::abs(mu * (ip - cap)) / std::max(1.0, cap));
    primal = std::max(primal, ip - cap);
  }
  const EigenDecomposition er = eigh(r);
  if (er.eigenvalues.size()) primal = std::max(primal, -er.eigenvalues.minCoeff());
  out.primal_feas = primal;
  const EigenDecomposition em = eigh(HermitianMatrix(m_recovered));
  out.dual_feas = em.eigenvalues.size() ? em.eigenvalues.minCoeff() : 0.0;
  return out;
}

Solution finalize_solution(const ProblemInstance& inst, const HermitianMatrix& r,
                           const DualVariables& duals, SolveMethod method,
                           const Tolerances& tol) {
  Solution sol;
  sol.covariance = r;
  sol.method = method;
  sol.duals = duals;
  if (sol.duals.mu2.size() != inst.users.size()) sol.duals.mu2.resize(inst.users.size(), 0.0);
  sol.capacity_nats = mutual_information(inst, r, tol);
  const double tr = r.trace_real();
  sol.tpc_active = inst.total_power - tr <= 1e-6 * std::max(1.0, inst.total_power);
  for (int k = 0; k < inst.num_users(); ++k) {
    const double cap = inst.users[static_cast<size_t>(k)].cap;
    const double slack = cap - interference_power(inst, r, k);
    sol.ipc_active.push_back(slack <= 1e-6 * std::max(1.0, cap));
  }
  sol.kkt = kkt_residuals(inst, r, sol.duals, tol);
  return sol;
}

}  // namespace sharecap
