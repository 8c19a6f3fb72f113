#include "wva/meter.hpp"

#include <cmath>
#include <stdexcept>

namespace wva {

namespace {

double long_double_moment(const Eigen::VectorXd& grid, const Eigen::VectorXd& amplitudes,
                          int k) {
  long double acc = 0.0L;
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    const long double w = static_cast<long double>(amplitudes(j)) * amplitudes(j);
    acc += w * powl(static_cast<long double>(grid(j)), k);
  }
  return static_cast<double>(acc);
}

}  // namespace

MeterModel::MeterModel(Eigen::VectorXd grid, Eigen::VectorXd amplitudes,
                       bool gaussian_analytic, double analytic_delta)
    : grid_(std::move(grid)),
      amplitudes_(std::move(amplitudes)),
      gaussian_analytic_(gaussian_analytic) {
  if (grid_.size() != amplitudes_.size() || grid_.size() < 2)
    throw std::invalid_argument("meter grid and amplitudes must match with >= 2 points");
  const double norm2 = amplitudes_.squaredNorm();
  if (std::abs(norm2 - 1.0) > 1e-10)
    throw std::invalid_argument("meter amplitudes are not normalized");
  delta_ = gaussian_analytic_ ? analytic_delta : std::sqrt(long_double_moment(grid_, amplitudes_, 2));
  if (!(delta_ > 0.0))
    throw std::invalid_argument("meter spread must be positive");
  const double mean = long_double_moment(grid_, amplitudes_, 1);
  if (std::abs(mean) > 1e-10 * delta_)
    throw std::invalid_argument("meter is not balanced: |<M>| exceeds 1e-10 * delta");
}

double MeterModel::moment(int k) const {
  if (k < 0) throw std::invalid_argument("moment order must be >= 0");
  if (gaussian_analytic_) {
    if (k % 2 == 1) return 0.0;
    double value = 1.0;  // (2k-1)!! delta^(2k) built up pairwise
    for (int i = 1; i < k; i += 2) value *= static_cast<double>(i) * delta_ * delta_;
    return value;
  }
  return grid_moment(k);
}

double MeterModel::grid_moment(int k) const {
  if (k < 0) throw std::invalid_argument("moment order must be >= 0");
  return long_double_moment(grid_, amplitudes_, k);
}

MeterModel gaussian_meter(double delta, Eigen::Index n_points, double half_width_sigmas) {
  if (!(delta > 0.0)) throw std::invalid_argument("meter spread must be positive");
  if (n_points < 3 || n_points % 2 == 0)
    throw std::invalid_argument("gaussian meter needs an odd point count >= 3");
  if (!(half_width_sigmas > 0.0))
    throw std::invalid_argument("gaussian meter half-width must be positive");

  const double w = half_width_sigmas * delta;
  const double h = 2.0 * w / static_cast<double>(n_points - 1);
  Eigen::VectorXd grid(n_points), amp(n_points);
  for (Eigen::Index j = 0; j < n_points; ++j) {
    // Symmetric construction: mirror points share the exact same |m|.
    const Eigen::Index off = j - (n_points - 1) / 2;
    const double m = h * static_cast<double>(off);
    const double quad = (j == 0 || j == n_points - 1) ? 0.5 * h : h;
    grid(j) = m;
    amp(j) = std::exp(-m * m / (4.0 * delta * delta)) * std::sqrt(quad);
  }
  amp /= amp.norm();
  return MeterModel(std::move(grid), std::move(amp), true, delta);
}

MeterModel custom_meter(const Eigen::VectorXd& grid, const Eigen::VectorXd& amplitudes) {
  if (grid.size() != amplitudes.size())
    throw std::invalid_argument("meter grid and amplitudes must have equal length");
  const double norm = amplitudes.norm();
  if (!(norm > 0.0) || !std::isfinite(norm))
    throw std::invalid_argument("meter amplitudes must be nonzero and finite");
  return MeterModel(grid, Eigen::VectorXd(amplitudes / norm), false, 0.0);
}

double meter_moment(const MeterModel& meter, int k) { return meter.moment(k); }

}  // namespace wva
