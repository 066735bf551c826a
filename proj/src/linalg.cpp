#include "rootsgd/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace rootsgd {

Matrix SymEig::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()).noalias() =
          a(i, j) * b;
    }
  }
  return out;
}

Vector vectorize(const Matrix& x) {
  // MatrixXd is column-major, so the raw storage already carries the
  // column-stacked order.
  return Eigen::Map<const Vector>(x.data(), x.size());
}

Matrix unvectorize(const Vector& v, Index p) {
  if (v.size() != p * p) {
    std::ostringstream msg;
    msg << "unvectorize: vector of length " << v.size()
        << " cannot fill a " << p << "x" << p << " matrix";
    throw std::invalid_argument(msg.str());
  }
  return Eigen::Map<const Matrix>(v.data(), p, p);
}

SymEig sym_eig(const Matrix& m) {
  if (m.rows() != m.cols()) {
    std::ostringstream msg;
    msg << "sym_eig: matrix is " << m.rows() << "x" << m.cols()
        << ", expected square";
    throw std::invalid_argument(msg.str());
  }
  const double scale = m.norm();
  const double asymmetry = (m - m.transpose()).norm();
  if (asymmetry > 1e-8 * std::max(scale, 1e-300)) {
    std::ostringstream msg;
    msg << "sym_eig: asymmetry " << asymmetry << " exceeds 1e-8 relative to "
        << "norm " << scale;
    throw std::invalid_argument(msg.str());
  }
  const Matrix sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "sym_eig: iteration failed to converge (dim " << m.rows()
        << ", Frobenius norm " << scale << ", max |entry| "
        << sym.cwiseAbs().maxCoeff() << ")";
    throw std::runtime_error(msg.str());
  }
  SymEig out;
  out.eigenvalues = solver.eigenvalues().reverse();
  out.eigenvectors = solver.eigenvectors().rowwise().reverse();
  return out;
}

namespace {

Matrix clamped_reconstruction(const Vector& clamped, const Matrix& vectors) {
  Matrix out = vectors * clamped.asDiagonal() * vectors.transpose();
  return 0.5 * (out + out.transpose()).eval();
}

}  // namespace

Matrix spectral_threshold_lower(const Matrix& m, double floor_value) {
  if (!(floor_value > 0.0)) {
    throw std::invalid_argument("spectral_threshold_lower: threshold must be positive");
  }
  SymEig eig = sym_eig(m);
  const Vector clamped = eig.eigenvalues.cwiseMax(floor_value);
  return clamped_reconstruction(clamped, eig.eigenvectors);
}

Matrix spectral_threshold_upper(const Matrix& m, double cap_value) {
  if (!(cap_value > 0.0)) {
    throw std::invalid_argument("spectral_threshold_upper: threshold must be positive");
  }
  SymEig eig = sym_eig(m);
  const Vector clamped = eig.eigenvalues.cwiseMin(cap_value);
  return clamped_reconstruction(clamped, eig.eigenvectors);
}

Vector solve_linear(const Matrix& a, const Vector& b) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument("solve_linear: matrix must be square");
  }
  if (a.rows() != b.size()) {
    std::ostringstream msg;
    msg << "solve_linear: matrix is " << a.rows() << "x" << a.cols()
        << " but right-hand side has length " << b.size();
    throw std::invalid_argument(msg.str());
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw std::invalid_argument("solve_linear: inputs must be finite");
  }
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-14)) {
    std::ostringstream msg;
    msg << "solve_linear: matrix singular to working precision "
        << "(reciprocal condition estimate " << rcond << ")";
    throw std::runtime_error(msg.str());
  }
  return lu.solve(b);
}

}  // namespace rootsgd
