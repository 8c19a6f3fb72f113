#include "wva/series.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "wva/fisher.hpp"
#include "wva/protocol.hpp"

namespace wva {

namespace {

using cd = std::complex<double>;

// Transition matrix elements (A^n)_fi for n = 0..5, realigned by the overlap
// phase so A_0 = |<psi_f|psi_i>| is real and every coefficient below is
// invariant under global phases of either state.
struct MatrixElements {
  std::array<cd, 6> a;  // a[n] = (A^n)_fi after realignment
  double d0;            // a[0], real and non-negative
};

MatrixElements transition_elements(const SystemState& psi_i, const SystemState& psi_f,
                                   const HermitianObservable& a) {
  if (psi_i.dim() != a.dim() || psi_f.dim() != a.dim()) {
    throw std::invalid_argument("state and observable dimensions differ");
  }
  MatrixElements out{};
  Eigen::VectorXcd v = psi_i.vector();
  for (int n = 0; n < 6; ++n) {
    out.a[static_cast<std::size_t>(n)] = psi_f.vector().dot(v);
    if (n < 5) v = a.apply(v);
  }
  const cd c = out.a[0];
  const cd u = std::abs(c) < 1e-14 ? cd(1.0, 0.0) : std::conj(c) / std::abs(c);
  for (auto& el : out.a) el *= u;
  out.d0 = out.a[0].real();
  return out;
}

std::array<double, 5> pf_coefficients(const MatrixElements& el, const MeterModel& meter) {
  const auto& a = el.a;
  const double d0 = el.d0;
  std::array<double, 5> c{};
  c[0] = d0 * d0;
  c[1] = 2.0 * d0 * a[1].imag() * meter.moment(1);
  c[2] = (std::norm(a[1]) - d0 * a[2].real()) * meter.moment(2);
  c[3] = -(d0 * a[3].imag() + 3.0 * (std::conj(a[2]) * a[1]).imag()) / 3.0 * meter.moment(3);
  c[4] = ((d0 * a[4] - 4.0 * std::conj(a[1]) * a[3]).real() + 3.0 * std::norm(a[2])) / 12.0 *
         meter.moment(4);
  return c;
}

std::array<double, 5> qq_coefficients(const MatrixElements& el, const MeterModel& meter) {
  const auto& a = el.a;
  std::array<double, 5> c{};
  c[0] = std::norm(a[1]) * meter.moment(2);
  c[1] = -2.0 * (std::conj(a[2]) * a[1]).imag() * meter.moment(3);
  c[2] = (std::norm(a[2]) - (std::conj(a[3]) * a[1]).real()) * meter.moment(4);
  c[3] = -((std::conj(a[1]) * a[4]).imag() - 3.0 * (std::conj(a[2]) * a[3]).imag()) / 3.0 *
         meter.moment(5);
  c[4] = ((std::conj(a[1]) * a[5] - 4.0 * std::conj(a[2]) * a[4]).real() +
          3.0 * std::norm(a[3])) /
         12.0 * meter.moment(6);
  return c;
}

std::array<cd, 5> qo_coefficients(const MatrixElements& el, const MeterModel& meter) {
  const auto& a = el.a;
  const double d0 = el.d0;
  const cd i_unit(0.0, 1.0);
  std::array<cd, 5> c{};
  c[0] = d0 * std::conj(a[1]) * meter.moment(1);
  c[1] = i_unit * (d0 * std::conj(a[2]) - std::norm(a[1])) * meter.moment(2);
  c[2] = 0.5 * (2.0 * std::conj(a[2]) * a[1] - a[2] * std::conj(a[1]) - d0 * std::conj(a[3])) *
         meter.moment(3);
  c[3] = -i_unit / 6.0 *
         (d0 * std::conj(a[4]) - 3.0 * std::conj(a[3]) * a[1] + 3.0 * std::norm(a[2]) -
          std::conj(a[1]) * a[3]) *
         meter.moment(4);
  c[4] = (d0 * std::conj(a[5]) - 4.0 * std::conj(a[4]) * a[1] + 6.0 * std::conj(a[3]) * a[2] -
          4.0 * std::conj(a[2]) * a[3] + std::conj(a[1]) * a[4]) /
         24.0 * meter.moment(5);
  return c;
}

}  // namespace

double SeriesCoefficients::evaluate(double g) const {
  double acc = coeffs[4];
  for (int k = 3; k >= 0; --k) {
    acc = acc * g + coeffs[static_cast<std::size_t>(k)];
  }
  return acc;
}

SeriesCoefficients expand_moments_series(const SystemState& psi_i, const SystemState& psi_f,
                                         const HermitianObservable& a, const MeterModel& meter,
                                         SeriesTarget target) {
  const MatrixElements el = transition_elements(psi_i, psi_f, a);
  SeriesCoefficients out{};
  out.target = target;
  switch (target) {
    case SeriesTarget::p_f:
      out.coeffs = pf_coefficients(el, meter);
      break;
    case SeriesTarget::qq:
      out.coeffs = qq_coefficients(el, meter);
      break;
    case SeriesTarget::qo_real:
    case SeriesTarget::qo_imag: {
      const auto qo = qo_coefficients(el, meter);
      for (std::size_t k = 0; k < qo.size(); ++k) {
        out.coeffs[k] = target == SeriesTarget::qo_real ? qo[k].real() : qo[k].imag();
      }
      break;
    }
  }
  return out;
}

ProtocolSeries expand_moments_series(const SystemState& psi_i, const SystemState& psi_f,
                                     const HermitianObservable& a, const MeterModel& meter) {
  const MatrixElements el = transition_elements(psi_i, psi_f, a);
  ProtocolSeries out{};
  out.p_f = {SeriesTarget::p_f, pf_coefficients(el, meter)};
  out.qq = {SeriesTarget::qq, qq_coefficients(el, meter)};
  const auto qo = qo_coefficients(el, meter);
  out.qo_real.target = SeriesTarget::qo_real;
  out.qo_imag.target = SeriesTarget::qo_imag;
  for (std::size_t k = 0; k < qo.size(); ++k) {
    out.qo_real.coeffs[k] = qo[k].real();
    out.qo_imag.coeffs[k] = qo[k].imag();
  }
  return out;
}

SeriesFisher series_fisher(const SystemState& psi_i, const SystemState& psi_f,
                           const HermitianObservable& a, const MeterModel& meter, double g,
                           SeriesVariant variant) {
  if (psi_i.dim() != a.dim() || psi_f.dim() != a.dim()) {
    throw std::invalid_argument("state and observable dimensions differ");
  }
  const double dm = meter.delta();
  const double dm2 = dm * dm;
  SeriesFisher out{};
  out.validity_warning = std::abs(g) * dm * a.max_abs_eigenvalue() >= 0.3;

  switch (variant) {
    case SeriesVariant::optimal: {
      const double d = overlap_delta(psi_i, psi_f).delta;
      const double a2 = a.second_moment(psi_i);
      const double total = 4.0 * a2 * dm2;
      const double d2 = d * d;
      const double x = g * g * dm2 * a2;
      const double denom = d2 + (1.0 - d2) * x;
      if (denom < 1e-300) {
        out.fm = 0.0;
        out.fpf = total * (1.0 - d2);
      } else {
        out.fm = total * d2 / denom;
        out.fpf = total * (1.0 - d2) * x / denom;
      }
      break;
    }
    case SeriesVariant::identity: {
      const double a1 = a.expectation(psi_i);
      const double a2 = a.second_moment(psi_i);
      out.fm = 4.0 * a1 * a1 * dm2;
      out.fpf = 4.0 * (a2 - a1 * a1) * dm2;
      break;
    }
    case SeriesVariant::generic_dip: {
      const double d2 = std::norm(psi_f.vector().dot(psi_i.vector()));
      const double afi2 = std::norm(psi_f.vector().dot(a.apply(psi_i.vector())));
      const double denom = d2 + g * g * afi2 * dm2;
      if (denom < 1e-300) {
        out.fm = 0.0;
        out.fpf = 4.0 * afi2 * dm2;
      } else {
        out.fm = 4.0 * d2 * afi2 * dm2 / denom;
        out.fpf = 4.0 * g * g * afi2 * afi2 * dm2 * dm2 / denom;
      }
      break;
    }
  }
  return out;
}

RegimeLabel regime_classify(const SystemState& psi_i, const HermitianObservable& a,
                            const MeterModel& meter, double g) {
  if (!std::isfinite(g)) {
    throw std::invalid_argument("coupling must be finite");
  }
  const PostSelection opt = optimal_postselection(psi_i, a);
  const double sqrt_a2 = std::sqrt(a.second_moment(psi_i));
  const double dm = meter.delta();
  const double abs_d = std::abs(opt.delta);
  const double denom = std::abs(g) * sqrt_a2 * dm;
  const double inf = std::numeric_limits<double>::infinity();

  RegimeLabel out{};
  out.ratio = denom > 0.0 ? abs_d / denom : (abs_d > 0.0 ? inf : 0.0);
  const double rel = std::abs(g) > 0.0 ? (opt.delta / g) * (opt.delta / g)
                                       : (abs_d > 0.0 ? inf : 0.0);
  out.epsilon = std::max({abs_d, g * g, rel});
  const WeakValue wv = weak_value(psi_i, opt.psi_f, a);
  out.g_aw_delta = wv.divergent ? inf : std::abs(g) * std::abs(wv.value) * dm;
  if (out.ratio < 1.0 / 3.0) {
    out.label = RegimeKind::a_counts_dominated;
  } else if (out.ratio > 3.0) {
    out.label = RegimeKind::b_meter_dominated;
  } else {
    out.label = RegimeKind::crossover;
  }
  return out;
}

std::vector<DipPoint> dip_profile(double theta_i, double g_delta,
                                  const std::vector<double>& theta_f_grid) {
  if (!(g_delta > 0.0) || !std::isfinite(g_delta)) {
    throw std::invalid_argument("g_delta must be positive");
  }
  const double x = g_delta * g_delta;
  std::vector<DipPoint> out;
  out.reserve(theta_f_grid.size());
  for (double theta_f : theta_f_grid) {
    const FisherReport exact = qubit_closed_forms(theta_i, theta_f, std::numbers::pi, g_delta);
    const double dfi = std::cos((theta_i + theta_f) / 2.0);
    const double afi = std::cos((theta_i - theta_f) / 2.0);
    const double d2 = dfi * dfi;
    const double a2 = afi * afi;
    const double denom = d2 + x * a2;
    const double fm_series = denom < 1e-300 ? 0.0 : 4.0 * d2 * a2 / denom;
    out.push_back({theta_f, fm_series, exact.fm, exact.fpf});
  }
  return out;
}

}  // namespace wva
