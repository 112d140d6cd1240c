#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mimoshape/types.hpp"

namespace mimoshape {

inline CMatrix skew_hermitian_part(const CMatrix& m) { return 0.5 * (m - m.adjoint()); }

/// exp(mu * R) for skew-Hermitian R, via the eigendecomposition of the
/// Hermitian matrix -iR.  The result is unitary up to rounding.
inline CMatrix expm_skew_hermitian(const CMatrix& r, double mu) {
  if (r.rows() != r.cols()) throw std::invalid_argument("expm_skew_hermitian: matrix must be square");
  const CMatrix h = Complex(0.0, -1.0) * skew_hermitian_part(r);
  Eigen::SelfAdjointEigenSolver<CMatrix> eig(0.5 * (h + h.adjoint()));
  const Eigen::VectorXd lam = eig.eigenvalues();
  CVector phase(lam.size());
  for (Eigen::Index k = 0; k < lam.size(); ++k) phase[k] = std::polar(1.0, mu * lam[k]);
  return eig.eigenvectors() * phase.asDiagonal() * eig.eigenvectors().adjoint();
}

/// Nearest unitary matrix (polar factor U V^H).
inline CMatrix nearest_unitary(const CMatrix& m) {
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

}  // namespace mimoshape
