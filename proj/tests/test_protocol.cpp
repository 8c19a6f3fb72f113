#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>

#include "wva/errors.hpp"
#include "wva/meter.hpp"
#include "wva/observable.hpp"
#include "wva/protocol.hpp"
#include "wva/state.hpp"

using namespace wva;
using std::numbers::pi;
using cplx = std::complex<double>;

namespace {

SystemState phased(const SystemState& s, double angle) {
  return SystemState{Eigen::VectorXcd(s.vector() * std::polar(1.0, angle))};
}

// qutrit fixture with complex structure in the observable eigenbasis
struct QutritFixture {
  HermitianObservable a;
  SystemState psi_i;
  SystemState psi_f;

  QutritFixture()
      : a(make_a()),
        psi_i(SystemState::normalized(make_vec(cplx(0.6, 0.15), cplx(-0.3, 0.2), cplx(0.45, -0.5)))),
        psi_f(SystemState::normalized(make_vec(cplx(0.2, -0.4), cplx(0.55, 0.1), cplx(-0.35, 0.3)))) {}

  static HermitianObservable make_a() {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(3, 3);
    m(0, 0) = -1.0;
    m(1, 1) = 0.4;
    m(2, 2) = 1.3;
    return HermitianObservable(m);
  }
  static Eigen::VectorXcd make_vec(cplx a0, cplx a1, cplx a2) {
    Eigen::VectorXcd v(3);
    v << a0, a1, a2;
    return v;
  }
};

}  // namespace

TEST_CASE("overlap alignment produces a real non-negative overlap") {
  const SystemState psi_i = bloch_state({0.9, 0.0});
  const SystemState psi_f = bloch_state({1.3, 2.1});
  const OverlapAlignment al = overlap_delta(psi_i, psi_f);
  const cplx raw = psi_f.overlap(psi_i);
  CHECK(al.delta == doctest::Approx(std::abs(raw)).epsilon(1e-14));
  // u * psi_f has real >= 0 overlap: <u psi_f | psi_i> = conj(u) <psi_f|psi_i>
  const cplx aligned = std::conj(al.alignment) * raw;
  CHECK(std::abs(aligned.imag()) < 1e-14);
  CHECK(aligned.real() >= 0.0);
  CHECK(std::abs(std::abs(al.alignment) - 1.0) < 1e-14);
}

TEST_CASE("pair postselection realigns the final state") {
  const SystemState psi_i = bloch_state({0.9, 0.0});
  const SystemState psi_f = bloch_state({1.3, 2.1});
  const PostSelection ps = pair_postselection(psi_i, psi_f);
  const cplx ov = ps.psi_f.overlap(psi_i);
  CHECK(std::abs(ov.imag()) < 1e-14);
  CHECK(ov.real() >= 0.0);
  CHECK(ps.delta == doctest::Approx(ov.real()).epsilon(1e-13));
}

TEST_CASE("optimal postselection matches the qubit closed form") {
  const HermitianObservable z = pauli_z();
  const double theta = pi / 3.0;
  const SystemState psi_i = bloch_state({theta, 0.0});
  const PostSelection ps = optimal_postselection(psi_i, z);

  // delta is the signed <A>/<A^2>^(1/2) = cos(theta) for sigma_z
  CHECK(ps.delta == doctest::Approx(std::cos(theta)).epsilon(1e-14));

  // the ansatz state equals bloch(theta, pi) for a real-azimuth qubit
  const SystemState expect = bloch_state({theta, pi});
  CHECK(std::abs(std::abs(ps.psi_f.overlap(expect)) - 1.0) < 1e-13);

  // A psi_i must vanish for an eigenstate of a singular observable
  Eigen::MatrixXcd proj = Eigen::MatrixXcd::Zero(2, 2);
  proj(1, 1) = 1.0;
  const HermitianObservable p1(proj);
  CHECK_THROWS_AS(optimal_postselection(bloch_state({0.0, 0.0}), p1), degeneracy_error);
}

TEST_CASE("weak value amplification and divergence flag") {
  const HermitianObservable z = pauli_z();
  const double theta = pi / 3.0;
  const SystemState psi_i = bloch_state({theta, 0.0});
  const PostSelection ps = optimal_postselection(psi_i, z);

  const WeakValue wv = weak_value(psi_i, ps.psi_f, z);
  CHECK(!wv.divergent);
  // optimal ansatz: A_w * delta = <A^2>^{1/2} = 1 for sigma_z
  CHECK((wv.value * ps.delta).real() == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(std::abs(wv.value.imag()) < 1e-13);
  CHECK(wv.value.real() == doctest::Approx(2.0).epsilon(1e-13));

  // orthogonal pair: divergent
  const WeakValue bad = weak_value(bloch_state({0.0, 0.0}), bloch_state({pi, 0.0}), z);
  CHECK(bad.divergent);
}

TEST_CASE("kernel derivative identities hold pointwise") {
  const QutritFixture fx;
  const MeterModel meter = gaussian_meter(0.7, 401, 6.0);
  const double g = 0.08;
  const double h = 1e-5;

  const MeterKernels k = meter_kernel_set(fx.psi_i, fx.psi_f, fx.a, meter, g);
  const MeterFunctions lo = meter_functions(fx.psi_i, fx.psi_f, fx.a, meter, g - h);
  const MeterFunctions hi = meter_functions(fx.psi_i, fx.psi_f, fx.a, meter, g + h);

  // q matches the separately assembled pair
  const MeterFunctions mid = meter_functions(fx.psi_i, fx.psi_f, fx.a, meter, g);
  CHECK((k.o - mid.o).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((k.q - mid.q).cwiseAbs().maxCoeff() < 1e-15);

  const double scale = fx.a.max_abs_eigenvalue() * meter.max_abs_grid();
  // d o/dg = -i q  (central difference)
  Eigen::VectorXcd dnum = (hi.o - lo.o) / (2.0 * h);
  Eigen::VectorXcd dana = cplx(0.0, -1.0) * k.q;
  CHECK((dnum - dana).cwiseAbs().maxCoeff() < 1e-6 * scale);

  // d^2 o/dg^2 = -r2 (central second difference)
  Eigen::VectorXcd d2num = (hi.o - 2.0 * mid.o + lo.o) / (h * h);
  CHECK((d2num + k.r2).cwiseAbs().maxCoeff() < 1e-4 * scale * scale);
}

TEST_CASE("postselection moments: normalization, zero-coupling limit, derivative link") {
  const QutritFixture fx;
  const MeterModel meter = gaussian_meter(0.7);
  const double g = 0.05;

  const PostSelection ps = pair_postselection(fx.psi_i, fx.psi_f);
  const PostselectionMoments m = postselection_moments(fx.psi_i, ps.psi_f, fx.a, meter, g);
  CHECK(m.p_f + m.p_fail == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.p_f > 0.0);
  CHECK(m.qq > 0.0);

  // g = 0: success probability is delta^2
  const PostselectionMoments at0 = postselection_moments(fx.psi_i, ps.psi_f, fx.a, meter, 0.0);
  CHECK(at0.p_f == doctest::Approx(ps.delta * ps.delta).epsilon(1e-13));

  // dp_f/dg = -2 Im qo against a central difference
  const double h = 1e-5;
  const double dp_num = (postselect_probability(fx.psi_i, ps.psi_f, fx.a, meter, g + h) -
                         postselect_probability(fx.psi_i, ps.psi_f, fx.a, meter, g - h)) /
                        (2.0 * h);
  CHECK(dp_num == doctest::Approx(-2.0 * m.qo.imag()).epsilon(1e-7));

  CHECK(postselect_probability(fx.psi_i, ps.psi_f, fx.a, meter, g) ==
        doctest::Approx(m.p_f).epsilon(1e-15));
}

TEST_CASE("failure probability stays accurate in the near-unity regime") {
  // identity postselection at theta = pi/3, g*delta = 1e-2: the complement
  // is ~7.5e-5 and must come out to full relative precision
  const SystemState psi = bloch_state({pi / 3.0, 0.0});
  const MeterModel meter = gaussian_meter(1.0);
  const PostselectionMoments m = postselection_moments(psi, psi, pauli_z(), meter, 1e-2);
  CHECK(m.p_f == doctest::Approx(0.99992500749950002).epsilon(1e-12));
  CHECK(std::abs(m.p_fail - 7.4992500499975e-5) < 1e-10 * 7.5e-5);

  // a complement of ~4e-22 is far below double rounding of 1 - p_f; only the
  // cancellation-free path can produce it
  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(2), e1 = Eigen::VectorXcd::Zero(2);
  e0(0) = 1.0;
  e1(1) = 1.0;
  const double eps = 1e-8;
  const SystemState near = near_eigenstate_fixture(SystemState{e0}, SystemState{e1}, eps);
  const double g = 1e-3;
  const PostselectionMoments tiny = postselection_moments(near, near, pauli_z(), meter, g);
  const double x = g * g;  // (g*delta)^2 at delta = 1
  const double expected = -2.0 * (eps * eps) / std::pow(1.0 + eps * eps, 2) * std::expm1(-2.0 * x);
  // extended-precision trig roundoff floors the relative accuracy near 1e-4
  // at this scale; the naive complement would be sign-wrong by six orders
  CHECK(std::abs(tiny.p_fail - expected) < 1e-3 * expected);
  CHECK(tiny.p_fail > 0.0);
}

TEST_CASE("failure probability matches the closed form for a complex pair") {
  const SystemState psi_i = bloch_state({0.9, 0.0});
  const SystemState psi_f = bloch_state({1.1, 0.7});
  const MeterModel meter = gaussian_meter(1.0);
  const PostSelection ps = pair_postselection(psi_i, psi_f);
  const PostselectionMoments m = postselection_moments(psi_i, ps.psi_f, pauli_z(), meter, 0.05);
  CHECK(m.p_f == doctest::Approx(0.90661914369467848).epsilon(1e-10));
  CHECK(m.p_fail == doctest::Approx(0.093380856305321518).epsilon(1e-10));
}

TEST_CASE("moments are invariant under global phases of either state") {
  const QutritFixture fx;
  const MeterModel meter = gaussian_meter(0.7);
  const double g = 0.05;

  const PostSelection ps0 = pair_postselection(fx.psi_i, fx.psi_f);
  const PostselectionMoments ref = postselection_moments(fx.psi_i, ps0.psi_f, fx.a, meter, g);

  const SystemState pi2 = phased(fx.psi_i, 1.234);
  const SystemState pf2 = phased(fx.psi_f, -0.777);
  const PostSelection ps2 = pair_postselection(pi2, pf2);
  const PostselectionMoments alt = postselection_moments(pi2, ps2.psi_f, fx.a, meter, g);

  CHECK(alt.p_f == doctest::Approx(ref.p_f).epsilon(1e-12));
  CHECK(alt.p_fail == doctest::Approx(ref.p_fail).epsilon(1e-12));
  CHECK(alt.qq == doctest::Approx(ref.qq).epsilon(1e-12));
  CHECK(std::abs(alt.qo - ref.qo) < 1e-12 * std::max(1.0, std::abs(ref.qo)));
}

TEST_CASE("conditional meter state is normalized with the success probability attached") {
  const QutritFixture fx;
  const MeterModel meter = gaussian_meter(0.7);
  const PostSelection ps = pair_postselection(fx.psi_i, fx.psi_f);
  const ConditionalMeterState cond =
      conditional_meter_state(fx.psi_i, ps.psi_f, fx.a, meter, 0.05);
  CHECK(std::abs(cond.amplitudes.norm() - 1.0) < 1e-12);
  CHECK(cond.prob == doctest::Approx(postselect_probability(fx.psi_i, ps.psi_f, fx.a, meter,
                                                            0.05))
                         .epsilon(1e-13));

  // exactly orthogonal pair at g = 0: the conditional state does not exist
  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(2), e1 = Eigen::VectorXcd::Zero(2);
  e0(0) = 1.0;
  e1(1) = 1.0;
  CHECK_THROWS_AS(
      conditional_meter_state(SystemState{e0}, SystemState{e1}, pauli_z(), meter, 0.0),
      degeneracy_error);
}

TEST_CASE("near-eigenstate fixture interpolates between orthogonal states") {
  Eigen::VectorXcd e0 = Eigen::VectorXcd::Zero(2), e1 = Eigen::VectorXcd::Zero(2);
  e0(0) = 1.0;
  e1(1) = 1.0;
  const SystemState a{e0}, b{e1};
  const double eps = 1e-4;
  const SystemState mix = near_eigenstate_fixture(a, b, eps);
  CHECK(std::abs(mix.vector().norm() - 1.0) < 1e-14);
  CHECK(std::abs(mix.overlap(a)) ==
        doctest::Approx(1.0 / std::sqrt(1.0 + eps * eps)).epsilon(1e-14));
  CHECK_THROWS_AS(near_eigenstate_fixture(a, bloch_state({0.4, 0.0}), eps),
                  std::invalid_argument);
}
