// SPDX-License-Identifier: Apache-2.0

#include "sharecap/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <sstream>

namespace sharecap {

namespace {

// Shared rank cutoff: relative to the largest eigenvalue magnitude with an
// absolute floor of 1 (channel gains in this problem are O(1), and the floor
// keeps decisions stable for near-zero matrices).
double rank_cutoff(const Rvec& eigenvalues, const Tolerances& tol) {
  const double lam_max = eigenvalues.size() ? eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  return tol.rank_eps * std::max(lam_max, 1.0);
}

}  // namespace

double max_abs(const Cmat& a) {
  return a.size() ? a.cwiseAbs().maxCoeff() : 0.0;
}

EigenDecomposition eigh(const HermitianMatrix& a) {
  Eigen::SelfAdjointEigenSolver<Cmat> es(a.mat());
  if (es.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigh: eigensolver failed to converge (dim=" << a.dim()
        << ", max|entry|=" << max_abs(a.mat()) << ")";
    throw SolverError(msg.str());
  }
  // Eigen returns ascending order; flip to descending.
  const Eigen::Index m = a.dim();
  EigenDecomposition out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors = Cmat(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    out.eigenvectors.col(i) = es.eigenvectors().col(m - 1 - i);
  }
  return out;
}

HermitianMatrix pinv(const HermitianMatrix& a, const Tolerances& tol) {
  const EigenDecomposition ed = eigh(a);
  const double cutoff = rank_cutoff(ed.eigenvalues, tol);
  Rvec inv = Rvec::Zero(ed.eigenvalues.size());
  for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
    if (std::abs(ed.eigenvalues[i]) > cutoff) inv[i] = 1.0 / ed.eigenvalues[i];
  }
  return HermitianMatrix(ed.eigenvectors * inv.asDiagonal() * ed.eigenvectors.adjoint());
}

HermitianMatrix positive_part(const HermitianMatrix& a, const Tolerances& tol) {
  const EigenDecomposition ed = eigh(a);
  // Relative cutoff without the absolute floor: the positive part of an
  // exactly-zero matrix must stay exactly zero.
  const double lam_abs_max = ed.eigenvalues.size() ? ed.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  const double cutoff = tol.rank_eps * lam_abs_max;
  Rvec kept = Rvec::Zero(ed.eigenvalues.size());
  for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
    if (ed.eigenvalues[i] > cutoff) kept[i] = ed.eigenvalues[i];
  }
  return HermitianMatrix(ed.eigenvectors * kept.asDiagonal() * ed.eigenvectors.adjoint());
}

HermitianMatrix rank1_positive_part_shifted(double lambda, const Cvec& u,
                                            const Tolerances& tol) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("rank1_positive_part_shifted: lambda must be positive");
  }
  const double nrm = u.norm();
  if (std::abs(nrm - 1.0) > std::max(tol.recon(u.size()), 1e-9)) {
    throw std::invalid_argument("rank1_positive_part_shifted: u must be unit norm");
  }
  const double weight = std::max(0.0, 1.0 - 1.0 / lambda);
  return HermitianMatrix(weight * (u * u.adjoint()));
}

HermitianMatrix sqrt_psd(const HermitianMatrix& a, const Tolerances& tol) {
  const EigenDecomposition ed = eigh(a);
  const double lam_max = ed.eigenvalues.size() ? ed.eigenvalues.maxCoeff() : 0.0;
  const double allowance = tol.psd_eps * std::max(lam_max, 1.0);
  if (ed.eigenvalues.size() && ed.eigenvalues.minCoeff() < -allowance) {
    std::ostringstream msg;
    msg << "sqrt_psd: matrix is not PSD (min eigenvalue " << ed.eigenvalues.minCoeff()
        << ", allowance " << -allowance << ")";
    throw std::invalid_argument(msg.str());
  }
  Rvec roots = Rvec::Zero(ed.eigenvalues.size());
  for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
    roots[i] = std::sqrt(std::max(0.0, ed.eigenvalues[i]));
  }
  return HermitianMatrix(ed.eigenvectors * roots.asDiagonal() * ed.eigenvectors.adjoint());
}

int rank_eps(const HermitianMatrix& a, const Tolerances& tol) {
  const EigenDecomposition ed = eigh(a);
  const double cutoff = rank_cutoff(ed.eigenvalues, tol);
  int r = 0;
  for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
    if (std::abs(ed.eigenvalues[i]) > cutoff) ++r;
  }
  return r;
}

bool nullspace_contained(const HermitianMatrix& a, const HermitianMatrix& b,
                         const Tolerances& tol) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument("nullspace_contained: dimension mismatch");
  }
  const EigenDecomposition ed = eigh(a);
  const double cutoff = rank_cutoff(ed.eigenvalues, tol);
  const EigenDecomposition eb = eigh(b);
  const double b_max = eb.eigenvalues.size() ? eb.eigenvalues.cwiseAbs().maxCoeff() : 0.0;
  const double bound = tol.rank_eps * (1.0 + b_max);
  for (Eigen::Index i = 0; i < ed.eigenvalues.size(); ++i) {
    if (std::abs(ed.eigenvalues[i]) > cutoff) continue;
    if ((b.mat() * ed.eigenvectors.col(i)).norm() > bound) return false;
  }
  return true;
}

bool is_psd(const HermitianMatrix& a, const Tolerances& tol) {
  const EigenDecomposition ed = eigh(a);
  if (!ed.eigenvalues.size()) return true;
  const double lam_max = ed.eigenvalues.maxCoeff();
  return ed.eigenvalues.minCoeff() >= -tol.psd_eps * std::max(lam_max, 1.0);
}

}  // namespace sharecap
