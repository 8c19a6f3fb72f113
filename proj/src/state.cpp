#include "wva/state.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace wva {

SystemState::SystemState(Eigen::VectorXcd v) : v_(std::move(v)) {
  if (v_.size() == 0) throw std::invalid_argument("state vector is empty");
  const double norm = v_.norm();
  if (std::abs(norm - 1.0) > 1e-12)
    throw std::invalid_argument("state vector is not normalized");
}

SystemState SystemState::normalized(const Eigen::VectorXcd& v) {
  if (v.size() == 0) throw std::invalid_argument("state vector is empty");
  const double norm = v.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw std::invalid_argument("cannot normalize a zero or non-finite vector");
  return SystemState(Eigen::VectorXcd(v / norm));
}

QubitAngles::QubitAngles(double theta_in, double phi_in) : theta(theta_in), phi(phi_in) {
  if (!(theta >= 0.0 && theta <= std::numbers::pi))
    throw std::invalid_argument("theta must lie in [0, pi]");
  if (!std::isfinite(phi)) throw std::invalid_argument("phi must be finite");
  constexpr double two_pi = 2.0 * std::numbers::pi;
  phi = std::remainder(phi, two_pi);
  if (phi < 0.0) phi += two_pi;
  if (phi >= two_pi) phi = 0.0;
}

SystemState bloch_state(const QubitAngles& angles) {
  Eigen::VectorXcd v(2);
  v(0) = std::cos(angles.theta / 2.0);
  v(1) = std::polar(std::sin(angles.theta / 2.0), angles.phi);
  return SystemState::normalized(v);
}

}  // namespace wva
