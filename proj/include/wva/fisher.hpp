#ifndef WVA_FISHER_HPP
#define WVA_FISHER_HPP

#include <complex>
#include <functional>

#include "wva/meter.hpp"
#include "wva/observable.hpp"
#include "wva/protocol.hpp"
#include "wva/state.hpp"

namespace wva {

// Readout model for the post-selected experiment. Every variant also counts
// the success/fail outcome itself.
enum class MeasurementBasis {
  meter_eigenbasis,  // project on the pointer grid
  conjugate_basis,   // project on the unitary-DFT transform of the grid
  counts_only,       // record only the binary post-selection outcome
};

// Sum over outcomes of (dP_k)^2 / P_k. Outcomes with P_k below 1e-15 are
// skipped when their derivative also vanishes (|dP_k| < 1e-12); otherwise the
// 1/P divergence is treated as a genuine singularity and raised.
double classical_fisher(const Eigen::VectorXd& probabilities,
                        const Eigen::VectorXd& derivatives);

// Pure-state quantum Fisher information by central differences:
//   value = 4 [ <dψ|dψ> - |<ψ|dψ>|^2 ],
// with an independent fidelity-based evaluation 8(1-|<ψ(g)|ψ(g+step)>|)/step^2
// returned alongside as a cross-check.
struct PureQfi {
  double value;
  double fidelity_value;
};

PureQfi qfi_pure(const std::function<Eigen::VectorXcd(double)>& state_fn, double g,
                 double step);

// The coupled system-meter state g -> U(g) (psi_i ⊗ phi) in the product basis
// (eigenbasis of A) x (meter grid); suitable input for qfi_pure.
std::function<Eigen::VectorXcd(double)> coupled_state_fn(const SystemState& psi_i,
                                                         const HermitianObservable& a,
                                                         const MeterModel& meter);

// qfi_pure applied to coupled_state_fn with the recommended step
// 1e-5 / (a_max * delta).
PureQfi qfi_pure_joint(const SystemState& psi_i, const HermitianObservable& a,
                       const MeterModel& meter, double g);

// Quantum Fisher information of the coupling for a separable input:
//   4 [ <A^2><M^2> - <A>^2<M>^2 ]  (= 4 <A^2> delta^2 for a balanced meter).
// Independent of g.
double qfi_coupling(const SystemState& psi_i, const HermitianObservable& a,
                    const MeterModel& meter);

// Optimal-POVM information extractable from the conditional meter state,
// weighted by the success probability: 4 [ <Q'Q> - |<Q'O>|^2 / p_f ].
double fm_bound(const SystemState& psi_i, const SystemState& psi_f,
                const HermitianObservable& a, const MeterModel& meter, double g);

// Information in the binary success/fail record:
//   (dp_f/dg)^2 [ 1/p_f + 1/(1-p_f) ]  with dp_f/dg = -2 Im<Q'O>.
// Returns 0 when p_f is within 1e-15 of {0,1} and the derivative vanishes
// with it; raises degeneracy_error when the cancellation fails.
double fpf_info(const SystemState& psi_i, const SystemState& psi_f,
                const HermitianObservable& a, const MeterModel& meter, double g);

struct FisherReport {
  double qfi;
  double fm;
  double fpf;
  double fps;  // fm + fpf
  double p_f;
  double delta;  // |<psi_f|psi_i>|
  std::complex<double> weak_value;
  bool weak_value_divergent;
};

// Full information budget at one configuration. fps is evaluated both as
// fm + fpf and by the direct combined formula
//   4 [ <Q'Q> - Re^2<Q'O>/p_f + Im^2<Q'O>/(1-p_f) ];
// the two must agree to 1e-10.
FisherReport fps_total(const SystemState& psi_i, const SystemState& psi_f,
                       const HermitianObservable& a, const MeterModel& meter, double g);

// Classical Fisher information of the joint outcome space
// {fail} ∪ {success x readout cell} for the chosen basis. Meter-basis
// derivatives are analytic via q(m); conjugate-basis derivatives use central
// differences with step 1e-5/(a_max * delta). counts_only reproduces fpf_info.
double measurement_fisher(const SystemState& psi_i, const SystemState& psi_f,
                          const HermitianObservable& a, const MeterModel& meter, double g,
                          MeasurementBasis basis);

// Exact two-level closed forms for A = sigma_z with a balanced Gaussian
// pointer of spread delta_m, parametrized by Bloch angles
// (theta_i, theta_f, phi = phi_i - phi_f) and the product g*delta:
//   A = cos(theta_i/2)cos(theta_f/2), B = e^{i phi} sin(theta_i/2)sin(theta_f/2),
//   p_f  = A^2 + |B|^2 + 2 A Re(B) e^{-2x},            x = (g delta)^2,
//   fm   = 4 delta^2 [ A^2 + |B|^2 - 2 A Re(B) e^{-2x}(1-4x)
//                      - 16 A^2 Re^2(B) x e^{-4x} / p_f ],
//   fpf  = 64 x delta^2 A^2 Re^2(B) e^{-4x} / (p_f (1-p_f)).
// Serves as the independent oracle for the grid pipeline.
FisherReport qubit_closed_forms(double theta_i, double theta_f, double phi, double g_delta,
                                double delta_m = 1.0);

// Unitary discrete Fourier transform, y_k = N^{-1/2} sum_j v_j e^{-2 pi i jk/N};
// defines the conjugate readout basis.
Eigen::VectorXcd unitary_dft(const Eigen::VectorXcd& v);

}  // namespace wva

#endif  // WVA_FISHER_HPP
