#ifndef WVA_SERIES_HPP
#define WVA_SERIES_HPP

#include <array>
#include <vector>

#include "wva/meter.hpp"
#include "wva/observable.hpp"
#include "wva/state.hpp"

namespace wva {

// Weak-coupling expansions of the post-selected readout moments in powers of
// g, with coefficients built from transition matrix elements (A^n)_fi and
// pointer moments <M^k> — never by differentiating grid numerics, so the two
// paths stay independent for cross-validation.

enum class SeriesTarget { p_f, qq, qo_real, qo_imag };

struct SeriesCoefficients {
  SeriesTarget target;
  std::array<double, 5> coeffs;  // powers g^0 .. g^4

  double evaluate(double g) const;
};

struct ProtocolSeries {
  SeriesCoefficients p_f;
  SeriesCoefficients qq;
  SeriesCoefficients qo_real;
  SeriesCoefficients qo_imag;
};

// Fourth-order expansion of one readout moment. Matrix elements are realigned
// by the overlap phase, so the coefficients are invariant under global phase
// changes of either state. The truncated polynomial approximates the exact
// grid value with residual O(g^5).
SeriesCoefficients expand_moments_series(const SystemState& psi_i, const SystemState& psi_f,
                                         const HermitianObservable& a, const MeterModel& meter,
                                         SeriesTarget target);

ProtocolSeries expand_moments_series(const SystemState& psi_i, const SystemState& psi_f,
                                     const HermitianObservable& a, const MeterModel& meter);

// Leading-order information formulas valid for g*delta*a_max << 1.
enum class SeriesVariant {
  optimal,      // fm/F = d^2 / (d^2 + (1-d^2) g^2 delta^2 <A^2>), complement in fpf
  identity,     // psi_f = psi_i: fm = 4<A>^2 delta^2, fpf = 4(<A^2>-<A>^2) delta^2
  generic_dip,  // fm = 4 d_fi^2 |A_fi|^2 delta^2 / (d_fi^2 + g^2 |A_fi|^2 delta^2)
};

struct SeriesFisher {
  double fm;
  double fpf;
  bool validity_warning;  // set when g * delta * a_max >= 0.3
};

SeriesFisher series_fisher(const SystemState& psi_i, const SystemState& psi_f,
                           const HermitianObservable& a, const MeterModel& meter, double g,
                           SeriesVariant variant);

// Small-coupling regime of the optimal-post-selection protocol: whether the
// binary success/fail record (a) or the conditional pointer readout (b)
// carries the information, decided by ratio = |d| / (g <A^2>^{1/2} delta)
// against thresholds 1/3 and 3.
enum class RegimeKind { a_counts_dominated, b_meter_dominated, crossover };

struct RegimeLabel {
  RegimeKind label;
  double ratio;
  double epsilon;     // Max{ |d|, g^2, (d/g)^2 }
  double g_aw_delta;  // g |A_w| delta, infinite for a divergent weak value
};

RegimeLabel regime_classify(const SystemState& psi_i, const HermitianObservable& a,
                            const MeterModel& meter, double g);

// Two-level dip tabulation at phi = pi, unit pointer spread: the readout
// information collapses where the post-selection overlap cos((theta_i+theta_f)/2)
// crosses zero, and the success/fail record peaks there to fill it.
struct DipPoint {
  double theta_f;
  double fm_series;
  double fm_exact;
  double fpf_exact;
};

std::vector<DipPoint> dip_profile(double theta_i, double g_delta,
                                  const std::vector<double>& theta_f_grid);

}  // namespace wva

#endif  // WVA_SERIES_HPP
