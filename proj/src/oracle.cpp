// SPDX-License-Identifier: Apache-2.0

#include "sharecap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "sharecap/log.hpp"

namespace sharecap {

namespace {

// Exact metric projection onto the PSD cone (no rank cutoff: Dykstra needs
// the true projection).
Cmat psd_clamp(const Cmat& a) {
  Eigen::SelfAdjointEigenSolver<Cmat> es(0.5 * (a + a.adjoint()));
  Rvec lam = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
}

// Projection onto {X : Re tr(A X) <= c} under the Frobenius inner product.
Cmat halfspace_clamp(const Cmat& x, const Cmat& a, double a_norm2, double c) {
  const double v = (a * x).trace().real() - c;
  if (v <= 0.0 || a_norm2 <= 0.0) return x;
  return x - (v / a_norm2) * a;
}

struct FeasibleSet {
  const ProblemInstance* inst;
  std::vector<Cmat> normals;        // I for the power cap, then each W2k
  std::vector<double> normals_sq;   // squared Frobenius norms
  std::vector<double> caps;

  explicit FeasibleSet(const ProblemInstance& instance) : inst(&instance) {
    const Eigen::Index m = instance.dim();
    normals.push_back(Cmat::Identity(m, m));
    normals_sq.push_back(static_cast<double>(m));
    caps.push_back(instance.total_power);
    for (const auto& u : instance.users) {
      normals.push_back(u.w2.mat());
      normals_sq.push_back(u.w2.mat().squaredNorm());
      caps.push_back(u.cap);
    }
  }

  // Dykstra's alternating projections over PSD cone + trace half-spaces.
  Cmat project(const Cmat& x0, int cycles) const {
    const Eigen::Index m = x0.rows();
    Cmat x = 0.5 * (x0 + x0.adjoint());
    const size_t nsets = normals.size() + 1;
    std::vector<Cmat> corr(nsets, Cmat::Zero(m, m));
    for (int it = 0; it < cycles; ++it) {
      double moved = 0.0;
      for (size_t s = 0; s < nsets; ++s) {
        const Cmat y = x + corr[s];
        Cmat proj = s == 0 ? psd_clamp(y)
                           : halfspace_clamp(y, normals[s - 1], normals_sq[s - 1], caps[s - 1]);
        corr[s] = y - proj;
        moved = std::max(moved, (proj - x).cwiseAbs().maxCoeff());
        x = proj;
      }
      if (moved < 1e-15 * std::max(1.0, x.cwiseAbs().maxCoeff())) break;
    }
    return x;
  }

  // Cheap exactly-feasible point: clamp to PSD, then shrink towards zero
  // until every trace constraint holds (they all scale linearly).
  Cmat polish(const Cmat& x) const {
    Cmat r = psd_clamp(x);
    double scale = 1.0;
    const double tr = r.trace().real();
    if (tr > inst->total_power && tr > 0.0) scale = std::min(scale, inst->total_power / tr);
    for (int k = 0; k < inst->num_users(); ++k) {
      const double ip = (inst->users[static_cast<size_t>(k)].w2.mat() * r).trace().real();
      const double cap = inst->users[static_cast<size_t>(k)].cap;
      if (ip > cap) scale = std::min(scale, ip > 0.0 ? cap / ip : 0.0);
    }
    if (scale < 1.0) r *= std::max(0.0, scale);
    return r;
  }
};

double objective(const Cmat& w1h, const Cmat& r) {
  Eigen::SelfAdjointEigenSolver<Cmat> es(0.5 * (w1h * r * w1h + (w1h * r * w1h).adjoint()));
  double nats = 0.0;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
    nats += std::log1p(std::max(0.0, es.eigenvalues()[i]));
  }
  return nats;
}

Cmat gradient(const Cmat& w1h, const Cmat& r) {
  const Eigen::Index m = r.rows();
  const Cmat s = Cmat::Identity(m, m) + w1h * r * w1h;
  const Cmat g = w1h * s.llt().solve(w1h);
  return 0.5 * (g + g.adjoint());
}

// Least-squares multipliers for the constraints that ended up tight: fit
// mu1 I + sum mu2k W2k to the gradient at the returned point, clipping
// negative coefficients. Reporting aid only.
DualVariables estimate_duals(const ProblemInstance& inst, const Cmat& w1h, const Cmat& r,
                             const std::vector<bool>& tight_tpc_ipc) {
  DualVariables duals;
  duals.mu2.assign(static_cast<size_t>(inst.num_users()), 0.0);
  std::vector<Cmat> basis;
  std::vector<int> which;  // -1 = TPC, k >= 0 = user k
  if (tight_tpc_ipc[0]) {
    basis.push_back(Cmat::Identity(inst.dim(), inst.dim()));
    which.push_back(-1);
  }
  for (int k = 0; k < inst.num_users(); ++k) {
    if (tight_tpc_ipc[static_cast<size_t>(k + 1)]) {
      basis.push_back(inst.users[static_cast<size_t>(k)].w2.mat());
      which.push_back(k);
    }
  }
  if (basis.empty()) return duals;
  const Cmat g = gradient(w1h, r);
  std::vector<int> active(basis.size());
  for (size_t i = 0; i < basis.size(); ++i) active[i] = 1;
  // Tiny non-negative least squares: solve, clip the most negative, repeat.
  for (int round = 0; round < static_cast<int>(basis.size()) + 1; ++round) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < basis.size(); ++i) {
      if (active[i]) idx.push_back(i);
    }
    if (idx.empty()) break;
    Eigen::MatrixXd gram(idx.size(), idx.size());
    Eigen::VectorXd rhs(idx.size());
    for (size_t i = 0; i < idx.size(); ++i) {
      for (size_t j = 0; j < idx.size(); ++j) {
        gram(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            (basis[idx[i]] * basis[idx[j]]).trace().real();
      }
      rhs(static_cast<Eigen::Index>(i)) = (basis[idx[i]] * g).trace().real();
    }
    Eigen::VectorXd mu = gram.ldlt().solve(rhs);
    int worst = -1;
    double worst_val = -1e-12;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      if (mu[i] < worst_val) {
        worst_val = mu[i];
        worst = static_cast<int>(i);
      }
    }
    if (worst < 0) {
      for (size_t i = 0; i < idx.size(); ++i) {
        const double v = std::max(0.0, mu[static_cast<Eigen::Index>(i)]);
        if (which[idx[i]] < 0) {
          duals.mu1 = v;
        } else {
          duals.mu2[static_cast<size_t>(which[idx[i]])] = v;
        }
      }
      break;
    }
    active[idx[static_cast<size_t>(worst)]] = 0;
  }
  return duals;
}

Solution assemble(const ProblemInstance& inst, const Cmat& w1h, const Cmat& r,
                  const Tolerances& tol) {
  Solution sol;
  sol.covariance = HermitianMatrix(r);
  sol.capacity_nats = objective(w1h, r);
  sol.method = SolveMethod::kOracle;
  const double tr = sol.covariance.trace_real();
  const double tpc_slack = inst.total_power - tr;
  sol.tpc_active = tpc_slack <= 1e-6 * std::max(1.0, inst.total_power);
  std::vector<bool> tight;
  tight.push_back(sol.tpc_active);
  for (int k = 0; k < inst.num_users(); ++k) {
    const double cap = inst.users[static_cast<size_t>(k)].cap;
    const double slack = cap - interference_power(inst, sol.covariance, k);
    const bool a = slack <= 1e-6 * std::max(1.0, cap);
    sol.ipc_active.push_back(a);
    tight.push_back(a);
  }
  sol.duals = estimate_duals(inst, w1h, r, tight);
  (void)tol;
  return sol;
}

}  // namespace

Solution oracle_projected_gradient(const ProblemInstance& inst, const OracleSettings& settings,
                                   const Tolerances& tol) {
  validate_instance(inst, tol);
  const FeasibleSet feasible(inst);
  const Eigen::Index m = inst.dim();
  const Cmat w1h = sqrt_psd(inst.w1, tol).mat();

  Cmat r = feasible.polish(Cmat::Identity(m, m) * (inst.total_power / static_cast<double>(m)));
  Cmat r_prev = r;
  double c_r = objective(w1h, r);
  Cmat best = r;
  double c_best = c_r;

  double step = settings.step0;
  double t_momentum = 1.0;
  int since_improvement = 0;
  double c_window = c_best;

  for (int it = 0; it < settings.max_iters; ++it) {
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
    const Cmat y = r + ((t_momentum - 1.0) / t_next) * (r - r_prev);
    Cmat cand = feasible.project(y + step * gradient(w1h, y), settings.dykstra_iters);
    double c_cand = objective(w1h, cand);
    if (c_cand < c_r) {
      // Momentum overshoot or step too large: fall back to a plain
      // backtracked step from the current point.
      t_momentum = 1.0;
      double s = step;
      for (int bt = 0; bt < 40; ++bt) {
        cand = feasible.project(r + s * gradient(w1h, r), settings.dykstra_iters);
        c_cand = objective(w1h, cand);
        if (c_cand >= c_r - 1e-15 * std::max(1.0, std::abs(c_r))) break;
        s *= 0.5;
      }
      step = std::max(s, 1e-12);
    } else {
      t_momentum = t_next;
      step *= 1.05;
    }
    r_prev = r;
    r = cand;
    c_r = c_cand;

    const Cmat polished = feasible.polish(r);
    const double c_pol = objective(w1h, polished);
    if (c_pol > c_best) {
      c_best = c_pol;
      best = polished;
    }
    if (++since_improvement >= 50) {
      if (c_best - c_window <= settings.tol * std::max(1.0, std::abs(c_best))) break;
      c_window = c_best;
      since_improvement = 0;
    }
  }

  std::ostringstream msg;
  msg << "oracle pg: capacity " << c_best;
  log_debug(msg.str());
  return assemble(inst, w1h, best, tol);
}

Solution oracle_bruteforce_2x2(const ProblemInstance& inst, const OracleSettings& settings,
                               const Tolerances& tol) {
  validate_instance(inst, tol);
  if (inst.dim() != 2) {
    throw std::invalid_argument("oracle_bruteforce_2x2: only dim == 2 supported");
  }
  const int g = std::max(2, settings.grid_points);
  const double pt = inst.total_power;
  const Cmat w1 = inst.w1.mat();

  // Parameterize the candidates so the curved pieces of the feasible set
  // become box faces:
  //   a = s*x,  b = s*(1-x),  c + i*d = rho * sqrt(a*b) * exp(i*phi)
  // with s in [0, P_T], x in [0, 1], rho in [0, 1], phi in [-pi, pi].
  // Positive semidefiniteness (|R_01|^2 <= R_00 R_11) and the power budget
  // then hold by construction, boundaries included -- and the boundaries are
  // where the interesting optima live (rank-one covariances at rho = 1, a
  // tight budget at s = P_T). Only the interference caps still reject
  // samples, so the refinement below can hug them from inside.
  const auto build = [](const double p[4]) {
    const double a = p[0] * p[1];
    const double b = p[0] * (1.0 - p[1]);
    const double r0 = p[2] * std::sqrt(a * b);
    Cmat r(2, 2);
    const Complex off(r0 * std::cos(p[3]), r0 * std::sin(p[3]));
    r << Complex(a, 0.0), off, std::conj(off), Complex(b, 0.0);
    return r;
  };
  // Evaluate a candidate after radial repair: a sample that exceeds a cap
  // is shrunk toward zero (s scales every entry linearly) until it sits
  // exactly on the binding cap. The feasible set is convex and contains 0,
  // so the repaired point is feasible. Repairing instead of rejecting
  // matters near an active cap: a lattice step in one coordinate would
  // otherwise need an exactly matching step in another to stay feasible,
  // and the refinement below would lock at whatever mismatch the lattice
  // happens to quantize.
  struct Candidate {
    double q[4];
    double nats;
  };
  const auto evaluate = [&](const double p[4]) {
    Candidate out;
    std::copy(p, p + 4, out.q);
    Cmat r = build(p);
    double scale = 1.0;
    for (int k = 0; k < inst.num_users(); ++k) {
      const double cap = inst.users[static_cast<size_t>(k)].cap;
      const double ip = (inst.users[static_cast<size_t>(k)].w2.mat() * r).trace().real();
      if (ip > cap) scale = std::min(scale, cap > 0.0 ? cap / ip : 0.0);
    }
    if (scale < 1.0) {
      out.q[0] *= scale;
      r *= scale;
    }
    const Complex det = (Cmat::Identity(2, 2) + w1 * r).determinant();
    out.nats = std::log(std::max(det.real(), 1e-300));
    return out;
  };

  const double kPi = std::acos(-1.0);
  const double lo[4] = {0.0, 0.0, 0.0, -kPi};
  const double hi[4] = {pt, 1.0, 1.0, kPi};
  double best[4] = {0.0, 0.0, 0.0, 0.0};
  double c_best = evaluate(best).nats;  // R = 0 is always feasible

  double p[4];
  for (int i0 = 0; i0 < g; ++i0) {
    p[0] = lo[0] + (hi[0] - lo[0]) * i0 / (g - 1);
    for (int i1 = 0; i1 < g; ++i1) {
      p[1] = lo[1] + (hi[1] - lo[1]) * i1 / (g - 1);
      for (int i2 = 0; i2 < g; ++i2) {
        p[2] = lo[2] + (hi[2] - lo[2]) * i2 / (g - 1);
        for (int i3 = 0; i3 < g; ++i3) {
          p[3] = lo[3] + (hi[3] - lo[3]) * i3 / (g - 1);
          const Candidate cand = evaluate(p);
          if (cand.nats > c_best) {
            c_best = cand.nats;
            std::copy(cand.q, cand.q + 4, best);
          }
        }
      }
    }
  }

  // Multi-scale zoom: re-grid a shrinking box around the incumbent. The
  // objective is concave over a convex set, so the coarse optimum sits in
  // the right basin and the only constraint that can reject samples is an
  // interference cap. Halve the box per level: the best feasible lattice
  // point can land up to half a box away from the true optimum, and a
  // faster shrink would let the optimum escape the next box.
  const int gz = 9;
  double h[4];
  for (int j = 0; j < 4; ++j) h[j] = 2.0 * (hi[j] - lo[j]) / (g - 1);
  for (int level = 0; level < 24; ++level) {
    // Re-scan at the same width until the incumbent stops moving, so the
    // optimum cannot outrun the shrinking box along a rejecting cap.
    for (int pass = 0; pass < 8; ++pass) {
      bool improved = false;
      double origin[4];
      std::copy(best, best + 4, origin);
      for (int i0 = 0; i0 < gz; ++i0) {
        p[0] = std::clamp(origin[0] - h[0] + 2.0 * h[0] * i0 / (gz - 1), lo[0], hi[0]);
        for (int i1 = 0; i1 < gz; ++i1) {
          p[1] = std::clamp(origin[1] - h[1] + 2.0 * h[1] * i1 / (gz - 1), lo[1], hi[1]);
          for (int i2 = 0; i2 < gz; ++i2) {
            p[2] = std::clamp(origin[2] - h[2] + 2.0 * h[2] * i2 / (gz - 1), lo[2], hi[2]);
            for (int i3 = 0; i3 < gz; ++i3) {
              p[3] = std::clamp(origin[3] - h[3] + 2.0 * h[3] * i3 / (gz - 1), lo[3], hi[3]);
              const Candidate cand = evaluate(p);
              if (cand.nats > c_best) {
                c_best = cand.nats;
                std::copy(cand.q, cand.q + 4, best);
                improved = true;
              }
            }
          }
        }
      }
      if (!improved) break;
    }
    for (int j = 0; j < 4; ++j) h[j] /= 2.0;
  }

  const Cmat r = build(best);
  const Cmat w1h = sqrt_psd(inst.w1, tol).mat();
  return assemble(inst, w1h, r, tol);
}

ComparisonReport compare(const ProblemInstance& inst, const Solution& a, const Solution& b,
                         double capacity_tol, const Tolerances& tol) {
  ComparisonReport rep;
  rep.capacity_gap = std::abs(a.capacity_nats - b.capacity_nats);
  rep.max_covariance_diff = max_abs(a.covariance.mat() - b.covariance.mat());
  rep.a_feasible = is_feasible(inst, a.covariance, tol).feasible;
  rep.b_feasible = is_feasible(inst, b.covariance, tol).feasible;
  rep.pass = rep.capacity_gap <= capacity_tol && rep.a_feasible && rep.b_feasible;
  return rep;
}

}  // namespace sharecap
