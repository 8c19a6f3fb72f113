#include "wva/protocol.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "wva/errors.hpp"

namespace wva {

namespace {

// Components of both states in the eigenbasis of the coupling observable.
struct EigenComponents {
  Eigen::VectorXcd i;  // <a|psi_i>
  Eigen::VectorXcd f;  // <a|psi_f>
  Eigen::VectorXcd w;  // conj(f_a) * i_a, the post-selection kernel weights
  std::complex<double> c;  // sum_a w_a = <psi_f|psi_i>
};

EigenComponents eigen_components(const SystemState& psi_i, const SystemState& psi_f,
                                 const HermitianObservable& a) {
  if (psi_i.dim() != a.dim() || psi_f.dim() != a.dim())
    throw std::invalid_argument("state dimension does not match observable");
  EigenComponents ec;
  ec.i = a.eigenvectors().adjoint() * psi_i.vector();
  ec.f = a.eigenvectors().adjoint() * psi_f.vector();
  ec.w = ec.f.conjugate().cwiseProduct(ec.i);
  ec.c = ec.w.sum();
  return ec;
}

// 1 - |<psi_f|psi_i>|^2 as an explicit sum of squares (Lagrange identity),
// immune to the cancellation that ruins 1 - |c|^2 when the overlap is close
// to unity.
long double overlap_deficit(const EigenComponents& ec) {
  const Eigen::Index d = ec.i.size();
  long double acc = 0.0L;
  for (Eigen::Index a = 0; a < d; ++a) {
    for (Eigen::Index b = a + 1; b < d; ++b) {
      const std::complex<double> det = ec.f(a) * ec.i(b) - ec.f(b) * ec.i(a);
      const long double dr = det.real(), di = det.imag();
      acc += dr * dr + di * di;
    }
  }
  return acc;
}

}  // namespace

OverlapAlignment overlap_delta(const SystemState& psi_i, const SystemState& psi_f) {
  if (psi_i.dim() != psi_f.dim())
    throw std::invalid_argument("states must share a dimension");
  const std::complex<double> c = psi_f.vector().dot(psi_i.vector());
  const double mag = std::abs(c);
  OverlapAlignment result;
  result.delta = mag;
  result.alignment = (mag < 1e-14) ? std::complex<double>(1.0, 0.0) : c / mag;
  return result;
}

PostSelection pair_postselection(const SystemState& psi_i, const SystemState& psi_f) {
  const OverlapAlignment od = overlap_delta(psi_i, psi_f);
  return PostSelection{SystemState::normalized(od.alignment * psi_f.vector()), od.delta,
                       od.alignment};
}

PostSelection optimal_postselection(const SystemState& psi_i, const HermitianObservable& a) {
  if (psi_i.dim() != a.dim())
    throw std::invalid_argument("state dimension does not match observable");
  const Eigen::VectorXcd v = a.apply(psi_i.vector());
  const double anorm = v.norm();  // <A^2>^(1/2)
  if (anorm <= 1e-14 * std::max(1.0, a.max_abs_eigenvalue()))
    throw degeneracy_error("optimal post-selection undefined: A annihilates the pre-selection");
  const double mean = psi_i.vector().dot(v).real();  // <A>
  const SystemState raw = SystemState::normalized(v);
  const OverlapAlignment od = overlap_delta(psi_i, raw);
  return PostSelection{SystemState::normalized(od.alignment * raw.vector()), mean / anorm,
                       od.alignment};
}

WeakValue weak_value(const SystemState& psi_i, const SystemState& psi_f,
                     const HermitianObservable& a) {
  if (psi_i.dim() != a.dim() || psi_f.dim() != a.dim())
    throw std::invalid_argument("state dimension does not match observable");
  const std::complex<double> c = psi_f.vector().dot(psi_i.vector());
  const std::complex<double> n = psi_f.vector().dot(a.apply(psi_i.vector()));
  WeakValue result;
  result.divergent = std::abs(c) < 1e-14;
  result.value = (std::abs(c) > 0.0)
                     ? n / c
                     : std::complex<double>(std::numeric_limits<double>::infinity(), 0.0);
  return result;
}

MeterFunctions meter_functions(const SystemState& psi_i, const SystemState& psi_f,
                               const HermitianObservable& a, const MeterModel& meter,
                               double g) {
  const EigenComponents ec = eigen_components(psi_i, psi_f, a);
  const Eigen::Index n = meter.points();
  const Eigen::Index d = a.dim();
  MeterFunctions mf;
  mf.o.resize(n);
  mf.q.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const long double m = meter.grid()(j);
    long double or_ = 0.0L, oi_ = 0.0L, qr_ = 0.0L, qi_ = 0.0L;
    for (Eigen::Index k = 0; k < d; ++k) {
      const long double lam = a.eigenvalues()(k);
      const long double u = static_cast<long double>(g) * lam * m;
      const long double cu = cosl(u), su = sinl(u);  // e^{-iu} = cu - i su
      const long double wr = ec.w(k).real(), wi = ec.w(k).imag();
      const long double er = wr * cu + wi * su;
      const long double ei = wi * cu - wr * su;
      or_ += er;
      oi_ += ei;
      qr_ += lam * er;
      qi_ += lam * ei;
    }
    mf.o(j) = std::complex<double>(static_cast<double>(or_), static_cast<double>(oi_));
    mf.q(j) = std::complex<double>(static_cast<double>(m * qr_), static_cast<double>(m * qi_));
  }
  return mf;
}

MeterKernels meter_kernel_set(const SystemState& psi_i, const SystemState& psi_f,
                              const HermitianObservable& a, const MeterModel& meter,
                              double g) {
  const EigenComponents ec = eigen_components(psi_i, psi_f, a);
  const Eigen::Index n = meter.points();
  const Eigen::Index d = a.dim();
  MeterKernels mk;
  mk.o.resize(n);
  mk.q.resize(n);
  mk.r2.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const long double m = meter.grid()(j);
    long double or_ = 0.0L, oi_ = 0.0L, qr_ = 0.0L, qi_ = 0.0L, rr_ = 0.0L, ri_ = 0.0L;
    for (Eigen::Index k = 0; k < d; ++k) {
      const long double lam = a.eigenvalues()(k);
      const long double u = static_cast<long double>(g) * lam * m;
      const long double cu = cosl(u), su = sinl(u);  // e^{-iu} = cu - i su
      const long double wr = ec.w(k).real(), wi = ec.w(k).imag();
      const long double er = wr * cu + wi * su;
      const long double ei = wi * cu - wr * su;
      or_ += er;
      oi_ += ei;
      qr_ += lam * er;
      qi_ += lam * ei;
      rr_ += lam * lam * er;
      ri_ += lam * lam * ei;
    }
    mk.o(j) = std::complex<double>(static_cast<double>(or_), static_cast<double>(oi_));
    mk.q(j) = std::complex<double>(static_cast<double>(m * qr_), static_cast<double>(m * qi_));
    mk.r2(j) =
        std::complex<double>(static_cast<double>(m * m * rr_), static_cast<double>(m * m * ri_));
  }
  return mk;
}

PostselectionMoments postselection_moments(const SystemState& psi_i, const SystemState& psi_f,
                                           const HermitianObservable& a,
                                           const MeterModel& meter, double g) {
  const EigenComponents ec = eigen_components(psi_i, psi_f, a);
  const Eigen::Index n = meter.points();
  const Eigen::Index d = a.dim();
  const long double deficit = overlap_deficit(ec);
  // Re-sum the overlap in extended precision: the pointwise cancellation in
  // the p_fail accumulator needs c = sum_a w_a beyond double rounding, or a
  // half-ulp loss in c leaks into complements near the 1e-22 scale.
  long double cr = 0.0L, ci = 0.0L;
  for (Eigen::Index k = 0; k < d; ++k) {
    cr += static_cast<long double>(ec.w(k).real());
    ci += static_cast<long double>(ec.w(k).imag());
  }

  long double pf = 0.0L, pfail = 0.0L, qq = 0.0L, qor = 0.0L, qoi = 0.0L;
  for (Eigen::Index j = 0; j < n; ++j) {
    const long double m = meter.grid()(j);
    const long double phi2 =
        static_cast<long double>(meter.amplitudes()(j)) * meter.amplitudes()(j);
    long double or_ = 0.0L, oi_ = 0.0L, qr_ = 0.0L, qi_ = 0.0L, rr_ = 0.0L, ri_ = 0.0L;
    for (Eigen::Index k = 0; k < d; ++k) {
      const long double lam = a.eigenvalues()(k);
      const long double u = static_cast<long double>(g) * lam * m;
      // Half-angle forms keep 1 - e^{-iu} exact for small u:
      //   1 - e^{-iu} = 2 sin^2(u/2) + i sin(u).
      const long double sh = sinl(0.5L * u), ch = cosl(0.5L * u);
      const long double t = 2.0L * sh * sh;    // 1 - cos(u)
      const long double su = 2.0L * sh * ch;   // sin(u)
      const long double cu = 1.0L - t;         // cos(u)
      const long double wr = ec.w(k).real(), wi = ec.w(k).imag();
      const long double er = wr * cu + wi * su;
      const long double ei = wi * cu - wr * su;
      or_ += er;
      oi_ += ei;
      qr_ += lam * er;
      qi_ += lam * ei;
      rr_ += wr * t + wi * su;  // w * (1 - e^{-iu}), real part
      ri_ += wi * t - wr * su;  // imaginary part
    }
    const long double qre = m * qr_, qim = m * qi_;
    pf += (or_ * or_ + oi_ * oi_) * phi2;
    qq += (qre * qre + qim * qim) * phi2;
    // conj(q) * o
    qor += (qre * or_ + qim * oi_) * phi2;
    qoi += (qre * oi_ - qim * or_) * phi2;
    // 1 - |o|^2 = (1 - |c|^2) + 2 Re(conj(c) r) - |r|^2 with o = c - r.
    pfail += (deficit + 2.0L * (cr * rr_ + ci * ri_) - (rr_ * rr_ + ri_ * ri_)) * phi2;
  }

  PostselectionMoments out;
  out.p_f = static_cast<double>(pf);
  out.p_fail = static_cast<double>(pfail);
  out.qq = static_cast<double>(qq);
  out.qo = std::complex<double>(static_cast<double>(qor), static_cast<double>(qoi));
  return out;
}

double postselect_probability(const SystemState& psi_i, const SystemState& psi_f,
                              const HermitianObservable& a, const MeterModel& meter,
                              double g) {
  return postselection_moments(psi_i, psi_f, a, meter, g).p_f;
}

ConditionalMeterState conditional_meter_state(const SystemState& psi_i,
                                              const SystemState& psi_f,
                                              const HermitianObservable& a,
                                              const MeterModel& meter, double g) {
  const MeterFunctions mf = meter_functions(psi_i, psi_f, a, meter, g);
  const Eigen::VectorXcd raw = mf.o.cwiseProduct(meter.amplitudes().cast<std::complex<double>>());
  const double pf = raw.squaredNorm();
  if (pf <= 1e-300)
    throw degeneracy_error("post-selection probability underflow: conditional state undefined");
  ConditionalMeterState out;
  out.amplitudes = raw / std::sqrt(pf);
  out.prob = pf;
  return out;
}

SystemState near_eigenstate_fixture(const SystemState& a_state, const SystemState& b_state,
                                    double epsilon) {
  if (a_state.dim() != b_state.dim())
    throw std::invalid_argument("states must share a dimension");
  if (!std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be finite");
  if (std::abs(a_state.overlap(b_state)) > 1e-12)
    throw std::invalid_argument("perturbation state must be orthogonal to the base state");
  return SystemState::normalized(a_state.vector() + epsilon * b_state.vector());
}

}  // namespace wva
