#ifndef WVA_STATE_HPP
#define WVA_STATE_HPP

#include <Eigen/Dense>
#include <complex>

namespace wva {

// A pure state of a finite-dimensional system: a unit-norm complex vector.
// Construction validates normalization; use SystemState::normalized to build
// from an arbitrary nonzero vector.
class SystemState {
 public:
  // Requires |v| = 1 within 1e-12; throws std::invalid_argument otherwise.
  explicit SystemState(Eigen::VectorXcd v);

  // Scales an arbitrary nonzero vector to unit norm.
  static SystemState normalized(const Eigen::VectorXcd& v);

  const Eigen::VectorXcd& vector() const { return v_; }
  Eigen::Index dim() const { return v_.size(); }

  std::complex<double> overlap(const SystemState& other) const {
    return v_.dot(other.v_);  // <this|other>
  }

 private:
  Eigen::VectorXcd v_;
};

// Bloch-sphere angles for a qubit: polar theta in [0, pi], azimuth phi
// reduced to [0, 2*pi).
struct QubitAngles {
  double theta;
  double phi;

  QubitAngles(double theta_in, double phi_in);
};

// |psi> = cos(theta/2)|0> + e^{i phi} sin(theta/2)|1>.
SystemState bloch_state(const QubitAngles& angles);

}  // namespace wva

#endif  // WVA_STATE_HPP
