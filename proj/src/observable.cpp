#include "wva/observable.hpp"

#include <cmath>
#include <stdexcept>

namespace wva {

HermitianObservable::HermitianObservable(const Eigen::MatrixXcd& matrix)
    : matrix_(matrix) {
  if (matrix_.rows() != matrix_.cols() || matrix_.rows() == 0)
    throw std::invalid_argument("observable must be a nonempty square matrix");
  const double asym = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
  if (asym > 1e-12)
    throw std::invalid_argument("observable is not Hermitian");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(matrix_);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("eigendecomposition failed to converge");
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();

  // Phase-fix each eigenvector: rotate so its largest-|.| entry is real > 0.
  for (Eigen::Index k = 0; k < eigenvectors_.cols(); ++k) {
    Eigen::Index imax = 0;
    eigenvectors_.col(k).cwiseAbs().maxCoeff(&imax);
    const std::complex<double> pivot = eigenvectors_(imax, k);
    const double mag = std::abs(pivot);
    if (mag > 0.0) eigenvectors_.col(k) *= std::conj(pivot) / mag;
  }
}

double HermitianObservable::max_abs_eigenvalue() const {
  return eigenvalues_.cwiseAbs().maxCoeff();
}

double HermitianObservable::expectation(const SystemState& psi) const {
  if (psi.dim() != dim())
    throw std::invalid_argument("state dimension does not match observable");
  const std::complex<double> e = psi.vector().dot(matrix_ * psi.vector());
  return e.real();
}

double HermitianObservable::second_moment(const SystemState& psi) const {
  if (psi.dim() != dim())
    throw std::invalid_argument("state dimension does not match observable");
  return (matrix_ * psi.vector()).squaredNorm();
}

HermitianObservable spectral_decompose(const Eigen::MatrixXcd& matrix) {
  return HermitianObservable(matrix);
}

HermitianObservable pauli_z() {
  Eigen::MatrixXcd m(2, 2);
  m << 1.0, 0.0, 0.0, -1.0;
  return HermitianObservable(m);
}

}  // namespace wva
