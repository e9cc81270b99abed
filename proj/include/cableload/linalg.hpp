#pragma once

// Dense solvers used by the gain design: ordered complex Schur form,
// continuous algebraic Riccati equation (Hamiltonian invariant subspace),
// continuous Lyapunov equation (Bartels-Stewart) and numerical rank of a
// controllability pair.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include "cableload/errors.hpp"

namespace cableload::linalg {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using CMatX = Eigen::MatrixXcd;
using cplx = std::complex<double>;

struct ComplexSchur {
  CMatX T;  // upper triangular
  CMatX U;  // unitary, A = U T U^H
};

inline ComplexSchur complex_schur(const MatX& A) {
  Eigen::ComplexSchur<CMatX> cs(A.cast<cplx>(), true);
  if (cs.info() != Eigen::Success) throw Error(ErrorCode::IllConditioned, "complex Schur did not converge");
  return ComplexSchur{cs.matrixT(), cs.matrixU()};
}

/// Swaps diagonal entries k and k+1 of the triangular factor with a Givens
/// rotation, keeping A = U T U^H.
inline void swap_adjacent(ComplexSchur& S, Eigen::Index k) {
  CMatX& T = S.T;
  const cplx a = T(k, k), b = T(k + 1, k + 1), t = T(k, k + 1);
  // [t, b - a] is an eigenvector of the 2x2 block for eigenvalue b
  const cplx x0 = t, x1 = b - a;
  const double r = std::hypot(std::abs(x0), std::abs(x1));
  if (r == 0.0) return;
  const cplx c = x0 / r, s = x1 / r;
  Eigen::Matrix2cd Q;
  Q << c, -std::conj(s), s, std::conj(c);
  T.middleRows(k, 2) = Q.adjoint() * T.middleRows(k, 2);
  T.middleCols(k, 2) = T.middleCols(k, 2) * Q;
  S.U.middleCols(k, 2) = S.U.middleCols(k, 2) * Q;
  T(k + 1, k) = 0.0;
}

/// Reorders so that eigenvalues with Re < 0 come first; returns their count.
inline Eigen::Index order_stable_first(ComplexSchur& S) {
  const Eigen::Index n = S.T.rows();
  Eigen::Index placed = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (S.T(k, k).real() < 0.0) {
      for (Eigen::Index j = k; j > placed; --j) swap_adjacent(S, j - 1);
      ++placed;
    }
  }
  return placed;
}

/// Solves A^T P + P A = -Q for Hurwitz A.
inline MatX lyapunov(const MatX& A, const MatX& Q) {
  if (A.rows() != A.cols() || Q.rows() != A.rows() || Q.cols() != A.cols()) {
    throw Error(ErrorCode::InvalidArgument, "lyapunov: dimension mismatch");
  }
  const Eigen::Index n = A.rows();
  const ComplexSchur S = complex_schur(A);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(S.T(k, k).real() < 0.0)) {
      throw Error(ErrorCode::NotHurwitz, "eigenvalue with real part " + std::to_string(S.T(k, k).real()));
    }
  }
  // T^H Y + Y T = C with Y = U^H P U
  const CMatX C = -(S.U.adjoint() * Q.cast<cplx>() * S.U);
  const CMatX TH = S.T.adjoint();
  CMatX Y = CMatX::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXcd rhs = C.col(j);
    for (Eigen::Index k = 0; k < j; ++k) rhs -= S.T(k, j) * Y.col(k);
    CMatX L = TH;
    L.diagonal().array() += S.T(j, j);
    Y.col(j) = L.triangularView<Eigen::Lower>().solve(rhs);
  }
  MatX P = (S.U * Y * S.U.adjoint()).real();
  return 0.5 * (P + P.transpose());
}

struct CareResult {
  MatX P;
  double residual = 0.0;  // ||A^T P + P A - P B R^-1 B^T P + Q||_F
  double basis_condition = 0.0;
  int refinement_steps = 0;
};

inline double care_residual(const MatX& A, const MatX& B, const MatX& Q, const MatX& R, const MatX& P) {
  const MatX BRB = B * R.llt().solve(B.transpose());
  return (A.transpose() * P + P * A - P * BRB * P + Q).norm();
}

/// PBH test on the modes with Re >= 0: some [A - lambda I, B] loses rank.
inline bool has_unstabilizable_mode(const MatX& A, const MatX& B) {
  const Eigen::Index n = A.rows();
  Eigen::ComplexEigenSolver<CMatX> es(A.cast<std::complex<double>>(), false);
  const CMatX Ac = A.cast<std::complex<double>>();
  const CMatX Bc = B.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto lam = es.eigenvalues()(k);
    if (lam.real() < -1e-9 * std::max(1.0, A.norm())) continue;
    CMatX M(n, n + B.cols());
    M << Ac - lam * CMatX::Identity(n, n), Bc;
    Eigen::JacobiSVD<CMatX> svd(M);
    const auto& sv = svd.singularValues();
    const double tol = std::max(sv(0), 1.0) * 1e-10;
    if (sv(n - 1) <= tol) return true;
  }
  return false;
}

/// A^T P + P A - P B R^-1 B^T P + Q = 0 via the stable invariant subspace of
/// the Hamiltonian matrix, followed by Newton-Kleinman polishing when the
/// residual is above 1e-12 ||P||_F.
inline CareResult care(const MatX& A, const MatX& B, const MatX& Q, const MatX& R) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n || R.rows() != B.cols() ||
      R.cols() != B.cols()) {
    throw Error(ErrorCode::InvalidArgument, "care: dimension mismatch");
  }
  Eigen::LLT<MatX> rllt(R);
  if (rllt.info() != Eigen::Success) throw Error(ErrorCode::InvalidArgument, "care: R must be positive definite");
  const MatX BRB = B * rllt.solve(B.transpose());

  MatX H(2 * n, 2 * n);
  H << A, -BRB, -Q, -A.transpose();
  ComplexSchur S = complex_schur(H);
  const Eigen::Index stable = order_stable_first(S);
  if (stable != n) {
    throw Error(ErrorCode::NotStabilizable,
                "Hamiltonian has " + std::to_string(stable) + " stable eigenvalues, need " + std::to_string(n));
  }
  const CMatX U1 = S.U.topLeftCorner(n, n);
  const CMatX U2 = S.U.bottomLeftCorner(n, n);
  Eigen::JacobiSVD<CMatX> svd(U1);
  const auto& sv = svd.singularValues();
  const double cond = sv(sv.size() - 1) > 0.0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= 1e12)) {
    if (has_unstabilizable_mode(A, B)) throw Error(ErrorCode::NotStabilizable, "an unstable mode is uncontrollable");
    throw Error(ErrorCode::IllConditioned, "stable subspace basis condition " + std::to_string(cond));
  }
  // P = U2 U1^-1, i.e. solve U1^T P^T = U2^T
  const CMatX Pc = U1.transpose().partialPivLu().solve(U2.transpose()).transpose();
  MatX P = Pc.real();
  P = 0.5 * (P + P.transpose());

  CareResult out;
  out.basis_condition = cond;
  out.residual = care_residual(A, B, Q, R, P);
  for (int it = 0; it < 5 && out.residual > 1e-12 * std::max(1.0, P.norm()); ++it) {
    const MatX K = rllt.solve(B.transpose() * P);
    const MatX Acl = A - B * K;
    MatX Pn;
    try {
      Pn = lyapunov(Acl, Q + K.transpose() * R * K);
    } catch (const Error&) {
      break;
    }
    const double rn = care_residual(A, B, Q, R, Pn);
    if (!(rn < out.residual)) break;
    P = Pn;
    out.residual = rn;
    ++out.refinement_steps;
  }
  out.P = P;
  return out;
}

inline double spectral_abscissa(const MatX& A) {
  Eigen::EigenSolver<MatX> es(A, false);
  return es.eigenvalues().real().maxCoeff();
}

/// Rank threshold sigma_max * 2 n * eps * 1e3 for a matrix with n rows.
inline double rank_tolerance(double sigma_max, Eigen::Index n) {
  return sigma_max * 2.0 * static_cast<double>(n) * std::numeric_limits<double>::epsilon() * 1e3;
}

inline Eigen::Index numerical_rank(const MatX& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<MatX> svd(M);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  const double tol = rank_tolerance(s(0), M.rows());
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) r += s(k) > tol ? 1 : 0;
  return r;
}

/// Dimension of the reachable subspace of (A, B) by block Krylov iteration
/// with repeated orthogonalization. Raw powers A^k B spread over many orders
/// of magnitude; orthonormalizing each block keeps the rank decision at the
/// scale of ||A|| and ||B||.
inline Eigen::Index controllable_dimension(const MatX& A, const MatX& B) {
  const Eigen::Index n = A.rows();
  if (B.size() == 0) return 0;
  const double normA = A.size() ? Eigen::JacobiSVD<MatX>(A).singularValues()(0) : 0.0;
  const double normB = Eigen::JacobiSVD<MatX>(B).singularValues()(0);
  if (normB == 0.0) return 0;

  MatX basis(n, 0);
  auto extend = [&](MatX W, double scale) -> MatX {
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() > 0) W -= basis * (basis.transpose() * W);
    }
    if (W.cols() == 0) return MatX(n, 0);
    Eigen::JacobiSVD<MatX> svd(W, Eigen::ComputeThinU);
    const auto& s = svd.singularValues();
    const double tol = rank_tolerance(scale, n);
    Eigen::Index r = 0;
    while (r < s.size() && s(r) > tol) ++r;
    r = std::min(r, n - basis.cols());
    MatX fresh = svd.matrixU().leftCols(r);
    MatX grown(n, basis.cols() + r);
    grown << basis, fresh;
    basis = grown;
    return fresh;
  };

  MatX block = extend(B, normB);
  while (block.cols() > 0 && basis.cols() < n) {
    block = extend(A * block, std::max(normA, std::numeric_limits<double>::min()));
  }
  return basis.cols();
}

/// [B, AB, ..., A^(n-1) B]; only sensible for small, well-scaled systems.
inline MatX controllability_matrix(const MatX& A, const MatX& B) {
  const Eigen::Index n = A.rows(), m = B.cols();
  MatX C(n, n * m);
  MatX blk = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    C.middleCols(k * m, m) = blk;
    blk = A * blk;
  }
  return C;
}

}  // namespace cableload::linalg
