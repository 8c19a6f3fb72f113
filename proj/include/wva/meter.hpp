#ifndef WVA_METER_HPP
#define WVA_METER_HPP

#include <Eigen/Dense>

namespace wva {

// Discretized meter state: a grid of pointer-variable eigenvalues m_j with
// real amplitudes phi_j (unit l2 norm, quadrature weight folded in for grid
// constructions). The meter must be balanced: <M> = 0 within 1e-10 * delta.
class MeterModel {
 public:
  MeterModel(Eigen::VectorXd grid, Eigen::VectorXd amplitudes, bool gaussian_analytic,
             double analytic_delta);

  const Eigen::VectorXd& grid() const { return grid_; }
  const Eigen::VectorXd& amplitudes() const { return amplitudes_; }
  Eigen::Index points() const { return grid_.size(); }

  // delta = sqrt(<M^2>), the pointer spread.
  double delta() const { return delta_; }

  // True when moments come from the closed-form Gaussian provider.
  bool gaussian_analytic() const { return gaussian_analytic_; }

  // <M^k>: closed form for the Gaussian provider ((2k-1)!! delta^(2k), odd
  // moments zero), otherwise the grid sum over |phi_j|^2.
  double moment(int k) const;

  // Grid sum regardless of provider; used to validate provider agreement.
  double grid_moment(int k) const;

  // Largest |m_j|; bounds phase arguments g*a*m in the coupling kernels.
  double max_abs_grid() const { return grid_.cwiseAbs().maxCoeff(); }

 private:
  Eigen::VectorXd grid_;
  Eigen::VectorXd amplitudes_;
  double delta_;
  bool gaussian_analytic_;
};

// Gaussian pointer of spread delta on a uniform symmetric grid of n_points
// nodes spanning [-half_width_sigmas*delta, +half_width_sigmas*delta].
// Amplitudes are exp(-m^2/(4 delta^2)) scaled by sqrt(trapezoid weight) and
// normalized, so |phi|^2 approximates a normal density of variance delta^2.
// n_points must be odd and >= 3 so m = 0 lies on the grid.
MeterModel gaussian_meter(double delta, Eigen::Index n_points = 2001,
                          double half_width_sigmas = 8.0);

// Arbitrary discrete meter: amplitudes are taken as given (normalized to
// unit l2 norm) over the supplied grid. Must come out balanced.
MeterModel custom_meter(const Eigen::VectorXd& grid, const Eigen::VectorXd& amplitudes);

// <M^k> of a meter; thin wrapper over MeterModel::moment.
double meter_moment(const MeterModel& meter, int k);

}  // namespace wva

#endif  // WVA_METER_HPP
