#pragma once

#include <Eigen/Dense>

namespace rootsgd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Eigendecomposition of a symmetric matrix with eigenvalues sorted
/// descending. Eigenvectors of repeated eigenvalues are only determined up
/// to rotation, so consumers should compare reconstructions rather than
/// individual columns.
struct SymEig {
  Vector eigenvalues;
  Matrix eigenvectors;  // one orthonormal column per eigenvalue

  Matrix reconstruct() const;
};

/// Kronecker product: result(i*p + k, j*q + l) = a(i, j) * b(k, l)
/// for a of size m x n and b of size p x q.
Matrix kron(const Matrix& a, const Matrix& b);

/// Column-stacked vectorization (x11, ..., xn1, x12, ..., xno).
Vector vectorize(const Matrix& x);

/// Inverse of vectorize for square output; v must have length p*p.
Matrix unvectorize(const Vector& v, Index p);

/// Symmetrizes the input as (m + m^T)/2 and decomposes. The input may be
/// asymmetric only up to 1e-8 relative Frobenius (accumulated rounding);
/// anything larger is rejected.
SymEig sym_eig(const Matrix& m);

/// Clamp eigenvalues from below: U * diag(max(floor, lambda_i)) * U^T.
/// The result satisfies result >= floor * I.
Matrix spectral_threshold_lower(const Matrix& m, double floor_value);

/// Clamp eigenvalues from above: U * diag(min(cap, lambda_i)) * U^T.
Matrix spectral_threshold_upper(const Matrix& m, double cap_value);

/// Solve a*x = b by pivoted LU factorization. Throws std::runtime_error
/// when a is singular to working precision, reporting the reciprocal
/// condition estimate.
Vector solve_linear(const Matrix& a, const Vector& b);

}  // namespace rootsgd
