#ifndef WVA_PROTOCOL_HPP
#define WVA_PROTOCOL_HPP

#include <complex>

#include "wva/meter.hpp"
#include "wva/observable.hpp"
#include "wva/state.hpp"

namespace wva {

// Overlap magnitude |<psi_f|psi_i>| together with the unit phase factor u
// such that u * psi_f has a real, non-negative overlap with psi_i.
struct OverlapAlignment {
  double delta;
  std::complex<double> alignment;
};

OverlapAlignment overlap_delta(const SystemState& psi_i, const SystemState& psi_f);

// A post-selection state stored in the aligned convention (<psi_f|psi_i>
// real >= 0). `delta` is the reported overlap parameter: |<psi_f|psi_i>| for
// an explicit pair, the signed <A>/<A^2>^(1/2) for the optimal ansatz.
struct PostSelection {
  SystemState psi_f;
  double delta;
  std::complex<double> alignment;  // phase applied to the caller's psi_f
};

// Realigns an explicit final state against psi_i.
PostSelection pair_postselection(const SystemState& psi_i, const SystemState& psi_f);

// The information-optimal ansatz psi_f = A psi_i / <A^2>^(1/2), aligned.
// Throws degeneracy_error when A psi_i vanishes (ansatz undefined).
PostSelection optimal_postselection(const SystemState& psi_i, const HermitianObservable& a);

struct WeakValue {
  std::complex<double> value;
  bool divergent;  // |<psi_f|psi_i>| < 1e-14: conditional mean blows up
};

WeakValue weak_value(const SystemState& psi_i, const SystemState& psi_f,
                     const HermitianObservable& a);

// Meter-space kernels of the post-selected coupling at strength g:
//   o(m) = sum_a w_a e^{-i g a m},  q(m) = m * sum_a a w_a e^{-i g a m},
// with w_a = <psi_f|a><a|psi_i> over the eigenpairs (a, |a>) of A.
// q is the g-derivative kernel: d o/dg = -i q pointwise.
struct MeterFunctions {
  Eigen::VectorXcd o;
  Eigen::VectorXcd q;
};

MeterFunctions meter_functions(const SystemState& psi_i, const SystemState& psi_f,
                               const HermitianObservable& a, const MeterModel& meter,
                               double g);

// Kernel triple extending MeterFunctions with the second g-derivative:
//   r2(m) = m^2 * sum_a a^2 w_a e^{-i g a m},  d^2 o/dg^2 = -r2 pointwise.
// Feeds analytic curvature of outcome probabilities (likelihood refinement).
struct MeterKernels {
  Eigen::VectorXcd o;
  Eigen::VectorXcd q;
  Eigen::VectorXcd r2;
};

MeterKernels meter_kernel_set(const SystemState& psi_i, const SystemState& psi_f,
                              const HermitianObservable& a, const MeterModel& meter,
                              double g);

// Scalar moments of the kernels over the meter distribution:
//   p_f   = <O'O>          success probability,
//   p_fail = 1 - p_f       evaluated by a cancellation-free path,
//   qq    = <Q'Q>,  qo = <Q'O>.
// dp_f/dg = -2 Im(qo).
struct PostselectionMoments {
  double p_f;
  double p_fail;
  double qq;
  std::complex<double> qo;
};

PostselectionMoments postselection_moments(const SystemState& psi_i, const SystemState& psi_f,
                                           const HermitianObservable& a,
                                           const MeterModel& meter, double g);

double postselect_probability(const SystemState& psi_i, const SystemState& psi_f,
                              const HermitianObservable& a, const MeterModel& meter,
                              double g);

// Normalized meter state conditioned on successful post-selection,
// amplitudes proportional to o(m_j) phi_j. Throws degeneracy_error when the
// success probability underflows.
struct ConditionalMeterState {
  Eigen::VectorXcd amplitudes;
  double prob;
};

ConditionalMeterState conditional_meter_state(const SystemState& psi_i,
                                              const SystemState& psi_f,
                                              const HermitianObservable& a,
                                              const MeterModel& meter, double g);

// (|a> + eps |b>) / sqrt(1 + eps^2) for orthogonal a, b: a pre-selection
// perturbed away from an eigenstate, exercising the 1 - delta^2 << 1 regime.
SystemState near_eigenstate_fixture(const SystemState& a_state, const SystemState& b_state,
                                    double epsilon);

}  // namespace wva

#endif  // WVA_PROTOCOL_HPP
