#ifndef WVA_OBSERVABLE_HPP
#define WVA_OBSERVABLE_HPP

#include <Eigen/Dense>
#include <complex>

#include "wva/state.hpp"

namespace wva {

// A Hermitian observable together with its spectral decomposition.
// Eigenvalues are sorted ascending; eigenvector phases are fixed so the
// largest-magnitude component of each column is real positive, which makes
// the decomposition reproducible across runs.
class HermitianObservable {
 public:
  // Requires M = M^dagger within 1e-12 (max elementwise deviation).
  explicit HermitianObservable(const Eigen::MatrixXcd& matrix);

  const Eigen::MatrixXcd& matrix() const { return matrix_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXcd& eigenvectors() const { return eigenvectors_; }
  Eigen::Index dim() const { return matrix_.rows(); }

  double max_abs_eigenvalue() const;

  // <psi|A|psi>
  double expectation(const SystemState& psi) const;
  // <psi|A^2|psi>
  double second_moment(const SystemState& psi) const;

  Eigen::VectorXcd apply(const Eigen::VectorXcd& v) const { return matrix_ * v; }

 private:
  Eigen::MatrixXcd matrix_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXcd eigenvectors_;
};

// Convenience wrapper returning the observable's spectral data.
HermitianObservable spectral_decompose(const Eigen::MatrixXcd& matrix);

// Pauli-z on a qubit, the standard two-level example.
HermitianObservable pauli_z();

}  // namespace wva

#endif  // WVA_OBSERVABLE_HPP
