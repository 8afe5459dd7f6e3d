// SPDX-License-Identifier: Apache-2.0
//
// Tolerance-aware Hermitian matrix helpers used throughout the solver:
// eigendecomposition, pseudo-inverse, PSD projection, matrix square root,
// numerical rank and null-space containment tests.

#pragma once

#include <Eigen/Dense>
#include <complex>
#include <stdexcept>

namespace sharecap {

using Complex = std::complex<double>;
using Cmat = Eigen::MatrixXcd;
using Cvec = Eigen::VectorXcd;
using Rvec = Eigen::VectorXd;

// Numerical knobs shared by every rank/PSD/reconstruction decision.
// rank_eps and psd_eps are relative to the largest eigenvalue magnitude
// (floored at 1 so that near-zero matrices do not inflate the cutoff);
// recon scales with the dimension; feas_tol is the absolute slack allowed
// on trace constraints.
struct Tolerances {
  double rank_eps = 1e-10;
  double psd_eps = 1e-9;
  double recon_eps = 1e-9;  // per unit dimension
  double feas_tol = 1e-8;

  double recon(Eigen::Index m) const { return recon_eps * static_cast<double>(m); }
};

// Thrown when a numerical kernel cannot deliver (eigensolver failure,
// iteration caps, inconsistent multipliers).
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Square complex matrix kept Hermitian by construction: the constructor
// symmetrizes (A + A^H)/2, so downstream code can rely on real eigenvalues.
class HermitianMatrix {
 public:
  HermitianMatrix() = default;
  explicit HermitianMatrix(const Cmat& a) {
    if (a.rows() != a.cols()) {
      throw std::invalid_argument("HermitianMatrix: matrix must be square");
    }
    m_ = 0.5 * (a + a.adjoint());
  }

  static HermitianMatrix Zero(Eigen::Index m) { return HermitianMatrix(Cmat::Zero(m, m)); }
  static HermitianMatrix Identity(Eigen::Index m) { return HermitianMatrix(Cmat::Identity(m, m)); }

  Eigen::Index dim() const { return m_.rows(); }
  const Cmat& mat() const { return m_; }
  double trace_real() const { return m_.trace().real(); }

 private:
  Cmat m_;
};

// Eigenvalues sorted descending; eigenvectors[:, i] pairs with eigenvalues[i].
struct EigenDecomposition {
  Rvec eigenvalues;
  Cmat eigenvectors;
};

// Full Hermitian eigendecomposition. Throws SolverError if the underlying
// solver does not converge (carries dimension and a magnitude estimate).
EigenDecomposition eigh(const HermitianMatrix& a);

// Moore-Penrose pseudo-inverse; eigenvalues with |lambda| above the rank
// cutoff are inverted, the rest dropped.
HermitianMatrix pinv(const HermitianMatrix& a, const Tolerances& tol = {});

// Projection onto the PSD cone: clamp negative (and below-cutoff) eigenvalues.
HermitianMatrix positive_part(const HermitianMatrix& a, const Tolerances& tol = {});

// (1 - 1/lambda)_+ * u u^H for a rank-one matrix lambda * u u^H with
// lambda > 0 and |u| = 1. Closed form for the PSD projection of
// I - (lambda u u^H)^-1 restricted to span(u); returns zero when lambda <= 1.
HermitianMatrix rank1_positive_part_shifted(double lambda, const Cvec& u,
                                            const Tolerances& tol = {});

// PSD square root via the spectral map sqrt(max(lambda, 0)). Inputs whose
// most-negative eigenvalue exceeds the PSD allowance are rejected.
HermitianMatrix sqrt_psd(const HermitianMatrix& a, const Tolerances& tol = {});

// Numerical rank: count of eigenvalues above rank_eps * max(|lambda|_max, 1).
int rank_eps(const HermitianMatrix& a, const Tolerances& tol = {});

// True iff null(A) is contained in null(B): every eigenvector of A with
// eigenvalue below the rank cutoff satisfies |B v| <= rank_eps * (1 + |B|).
bool nullspace_contained(const HermitianMatrix& a, const HermitianMatrix& b,
                         const Tolerances& tol = {});

// Convenience checks built on the same cutoffs.
bool is_psd(const HermitianMatrix& a, const Tolerances& tol = {});
double max_abs(const Cmat& a);

}  // namespace sharecap
