#include "wva/fisher.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "wva/errors.hpp"

namespace wva {

namespace {

constexpr double kProbabilityFloor = 1e-15;
constexpr double kDerivativeFloor = 1e-12;

// Shared evaluation of the information budget with consistent handling of the
// degenerate p_f -> {0,1} limits across fm/fpf/fps.
struct InfoPieces {
  double p_f;
  double p_fail;
  double fm;
  double fpf;
  double fps_direct;
};

InfoPieces info_pieces(const PostselectionMoments& mom) {
  if (!(mom.p_f > 1e-300)) {
    throw degeneracy_error("post-selection probability underflow: p_f <= 1e-300");
  }
  InfoPieces out{};
  out.p_f = mom.p_f;
  out.p_fail = mom.p_fail;
  const double qor = mom.qo.real();
  const double qoi = mom.qo.imag();
  out.fm = 4.0 * (mom.qq - (qor * qor + qoi * qoi) / mom.p_f);

  double tail = 0.0;  // Im^2<Q'O>/(1-p_f) contribution, shared by fpf and fps
  if (mom.p_f < kProbabilityFloor || mom.p_fail < kProbabilityFloor) {
    if (std::abs(2.0 * qoi) >= kDerivativeFloor) {
      throw degeneracy_error(
          "success probability saturates while its coupling derivative does not vanish");
    }
    out.fpf = 0.0;
  } else {
    tail = 4.0 * qoi * qoi / mom.p_fail;
    out.fpf = 4.0 * qoi * qoi / mom.p_f + tail;
  }
  out.fps_direct = 4.0 * (mom.qq - qor * qor / mom.p_f) + tail;
  return out;
}

}  // namespace

double classical_fisher(const Eigen::VectorXd& probabilities,
                        const Eigen::VectorXd& derivatives) {
  if (probabilities.size() == 0 || probabilities.size() != derivatives.size()) {
    throw std::invalid_argument("probability and derivative vectors must match and be non-empty");
  }
  long double sum_p = 0.0L;
  long double sum_dp = 0.0L;
  for (Eigen::Index k = 0; k < probabilities.size(); ++k) {
    if (!std::isfinite(probabilities[k]) || !std::isfinite(derivatives[k])) {
      throw std::invalid_argument("non-finite entry in outcome distribution");
    }
    if (probabilities[k] < -1e-12) {
      throw std::invalid_argument("negative outcome probability");
    }
    sum_p += static_cast<long double>(probabilities[k]);
    sum_dp += static_cast<long double>(derivatives[k]);
  }
  if (std::abs(static_cast<double>(sum_p) - 1.0) > 1e-9) {
    throw std::invalid_argument("outcome probabilities do not sum to 1");
  }
  if (std::abs(static_cast<double>(sum_dp)) > 1e-9) {
    throw std::invalid_argument("outcome probability derivatives do not sum to 0");
  }
  long double acc = 0.0L;
  for (Eigen::Index k = 0; k < probabilities.size(); ++k) {
    const double p = probabilities[k];
    const double dp = derivatives[k];
    if (p < kProbabilityFloor) {
      if (std::abs(dp) < kDerivativeFloor) continue;
      throw degeneracy_error(
          "singular information: outcome probability vanishes but its derivative does not");
    }
    acc += static_cast<long double>(dp) * dp / p;
  }
  return static_cast<double>(acc);
}

PureQfi qfi_pure(const std::function<Eigen::VectorXcd(double)>& state_fn, double g,
                 double step) {
  if (!(step > 0.0) || !std::isfinite(step) || !std::isfinite(g)) {
    throw std::invalid_argument("qfi_pure requires finite g and positive step");
  }
  const Eigen::VectorXcd s0 = state_fn(g);
  const Eigen::VectorXcd sp = state_fn(g + step);
  const Eigen::VectorXcd sm = state_fn(g - step);
  if (s0.size() == 0 || sp.size() != s0.size() || sm.size() != s0.size()) {
    throw std::invalid_argument("state function returned inconsistent dimensions");
  }
  for (const auto* s : {&s0, &sp, &sm}) {
    if (std::abs(s->norm() - 1.0) > 1e-8) {
      throw std::invalid_argument("state normalization drift exceeds 1e-8");
    }
  }

  const double inv2h = 1.0 / (2.0 * step);
  long double dd = 0.0L;       // <dψ|dψ>
  long double sd_re = 0.0L;    // <ψ|dψ>
  long double sd_im = 0.0L;
  long double fid_re = 0.0L;   // <ψ(g)|ψ(g+step)>
  long double fid_im = 0.0L;
  for (Eigen::Index k = 0; k < s0.size(); ++k) {
    const long double dre = (static_cast<long double>(sp[k].real()) - sm[k].real()) * inv2h;
    const long double dim = (static_cast<long double>(sp[k].imag()) - sm[k].imag()) * inv2h;
    const long double ore = s0[k].real();
    const long double oim = s0[k].imag();
    dd += dre * dre + dim * dim;
    sd_re += ore * dre + oim * dim;
    sd_im += ore * dim - oim * dre;
    fid_re += ore * static_cast<long double>(sp[k].real()) + oim * sp[k].imag();
    fid_im += ore * static_cast<long double>(sp[k].imag()) - oim * sp[k].real();
  }
  const long double overlap2 = sd_re * sd_re + sd_im * sd_im;
  const long double fid = sqrtl(fid_re * fid_re + fid_im * fid_im);
  PureQfi out{};
  out.value = static_cast<double>(4.0L * (dd - overlap2));
  out.fidelity_value =
      static_cast<double>(8.0L * (1.0L - fid) / (static_cast<long double>(step) * step));
  return out;
}

std::function<Eigen::VectorXcd(double)> coupled_state_fn(const SystemState& psi_i,
                                                         const HermitianObservable& a,
                                                         const MeterModel& meter) {
  if (psi_i.dim() != a.dim()) {
    throw std::invalid_argument("state and observable dimensions differ");
  }
  const Eigen::VectorXcd comps = a.eigenvectors().adjoint() * psi_i.vector();
  const Eigen::VectorXd lambda = a.eigenvalues();
  const Eigen::VectorXd grid = meter.grid();
  const Eigen::VectorXd amp = meter.amplitudes();
  return [comps, lambda, grid, amp](double g) {
    const Eigen::Index d = comps.size();
    const Eigen::Index n = grid.size();
    Eigen::VectorXcd out(d * n);
    for (Eigen::Index k = 0; k < d; ++k) {
      for (Eigen::Index j = 0; j < n; ++j) {
        out[k * n + j] = comps[k] * std::polar(amp[j], -g * lambda[k] * grid[j]);
      }
    }
    return out;
  };
}

PureQfi qfi_pure_joint(const SystemState& psi_i, const HermitianObservable& a,
                       const MeterModel& meter, double g) {
  const double a_max = a.max_abs_eigenvalue();
  if (!(a_max > 1e-300)) {
    throw std::invalid_argument("observable has zero spectral radius");
  }
  const double step = 1e-5 / (a_max * meter.delta());
  return qfi_pure(coupled_state_fn(psi_i, a, meter), g, step);
}

double qfi_coupling(const SystemState& psi_i, const HermitianObservable& a,
                    const MeterModel& meter) {
  const double a2 = a.second_moment(psi_i);
  const double a1 = a.expectation(psi_i);
  const double m1 = meter.moment(1);
  const double m2 = meter.moment(2);
  return 4.0 * (a2 * m2 - a1 * a1 * m1 * m1);
}

double fm_bound(const SystemState& psi_i, const SystemState& psi_f,
                const HermitianObservable& a, const MeterModel& meter, double g) {
  const PostselectionMoments mom = postselection_moments(psi_i, psi_f, a, meter, g);
  if (!(mom.p_f > 1e-300)) {
    throw degeneracy_error("post-selection probability underflow: p_f <= 1e-300");
  }
  const double qor = mom.qo.real();
  const double qoi = mom.qo.imag();
  return 4.0 * (mom.qq - (qor * qor + qoi * qoi) / mom.p_f);
}

double fpf_info(const SystemState& psi_i, const SystemState& psi_f,
                const HermitianObservable& a, const MeterModel& meter, double g) {
  return info_pieces(postselection_moments(psi_i, psi_f, a, meter, g)).fpf;
}

FisherReport fps_total(const SystemState& psi_i, const SystemState& psi_f,
                       const HermitianObservable& a, const MeterModel& meter, double g) {
  const PostselectionMoments mom = postselection_moments(psi_i, psi_f, a, meter, g);
  const InfoPieces pieces = info_pieces(mom);
  const double fps = pieces.fm + pieces.fpf;
  if (std::abs(pieces.fps_direct - fps) > 1e-10 * std::max(1.0, std::abs(fps))) {
    throw std::runtime_error("combined-information consistency check failed");
  }
  FisherReport report{};
  report.qfi = qfi_coupling(psi_i, a, meter);
  report.fm = pieces.fm;
  report.fpf = pieces.fpf;
  report.fps = fps;
  report.p_f = pieces.p_f;
  report.delta = overlap_delta(psi_i, psi_f).delta;
  const WeakValue wv = weak_value(psi_i, psi_f, a);
  report.weak_value = wv.value;
  report.weak_value_divergent = wv.divergent;
  return report;
}

double measurement_fisher(const SystemState& psi_i, const SystemState& psi_f,
                          const HermitianObservable& a, const MeterModel& meter, double g,
                          MeasurementBasis basis) {
  const PostselectionMoments mom = postselection_moments(psi_i, psi_f, a, meter, g);
  const double dp_fail = 2.0 * mom.qo.imag();

  if (basis == MeasurementBasis::counts_only) {
    Eigen::VectorXd p(2);
    Eigen::VectorXd dp(2);
    p << mom.p_f, mom.p_fail;
    dp << -dp_fail, dp_fail;
    return classical_fisher(p, dp);
  }

  const Eigen::VectorXd& amp = meter.amplitudes();
  const Eigen::Index n = amp.size();

  if (basis == MeasurementBasis::meter_eigenbasis) {
    const MeterFunctions mf = meter_functions(psi_i, psi_f, a, meter, g);
    Eigen::VectorXd p(n + 1);
    Eigen::VectorXd dp(n + 1);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = amp[j] * amp[j];
      p[j] = std::norm(mf.o[j]) * w;
      dp[j] = 2.0 * (std::conj(mf.o[j]) * mf.q[j]).imag() * w;
    }
    p[n] = mom.p_fail;
    dp[n] = dp_fail;
    return classical_fisher(p, dp);
  }

  // Conjugate basis: transform the conditional amplitudes and differentiate
  // the transformed probabilities by central differences.
  const double h = 1e-5 / (a.max_abs_eigenvalue() * meter.delta());
  const MeterFunctions mf0 = meter_functions(psi_i, psi_f, a, meter, g);
  const MeterFunctions mfp = meter_functions(psi_i, psi_f, a, meter, g + h);
  const MeterFunctions mfm = meter_functions(psi_i, psi_f, a, meter, g - h);
  const Eigen::VectorXcd ampc = amp.cast<std::complex<double>>();
  const Eigen::VectorXcd t0 = unitary_dft(mf0.o.cwiseProduct(ampc));
  const Eigen::VectorXcd tp = unitary_dft(mfp.o.cwiseProduct(ampc));
  const Eigen::VectorXcd tm = unitary_dft(mfm.o.cwiseProduct(ampc));
  const PostselectionMoments momp = postselection_moments(psi_i, psi_f, a, meter, g + h);
  const PostselectionMoments momm = postselection_moments(psi_i, psi_f, a, meter, g - h);
  const double inv2h = 1.0 / (2.0 * h);
  Eigen::VectorXd p(n + 1);
  Eigen::VectorXd dp(n + 1);
  for (Eigen::Index k = 0; k < n; ++k) {
    p[k] = std::norm(t0[k]);
    dp[k] = (std::norm(tp[k]) - std::norm(tm[k])) * inv2h;
  }
  p[n] = mom.p_fail;
  dp[n] = (momp.p_fail - momm.p_fail) * inv2h;
  return classical_fisher(p, dp);
}

FisherReport qubit_closed_forms(double theta_i, double theta_f, double phi, double g_delta,
                                double delta_m) {
  for (double theta : {theta_i, theta_f}) {
    if (!(theta >= 0.0 && theta <= std::numbers::pi)) {
      throw std::invalid_argument("Bloch polar angle must lie in [0, pi]");
    }
  }
  if (!std::isfinite(phi) || !std::isfinite(g_delta)) {
    throw std::invalid_argument("phi and g_delta must be finite");
  }
  if (!(delta_m > 0.0) || !std::isfinite(delta_m)) {
    throw std::invalid_argument("meter spread must be positive");
  }

  const double ci = std::cos(theta_i / 2.0);
  const double si = std::sin(theta_i / 2.0);
  const double cf = std::cos(theta_f / 2.0);
  const double sf = std::sin(theta_f / 2.0);
  const double big_a = ci * cf;
  const double re_b = std::cos(phi) * si * sf;
  const double im_b = std::sin(phi) * si * sf;

  const double x = g_delta * g_delta;
  const double em2x = std::exp(-2.0 * x);
  const double em1 = std::expm1(-2.0 * x);  // e^{-2x} - 1, exact near x = 0
  const double cross = 2.0 * big_a * re_b;

  // p_f = |A+B|^2 + 2 A Re(B) (e^{-2x} - 1); the complement uses the exact
  // identity 1 - |A+B|^2 = |det|^2 of the (psi_f, psi_i) component matrix.
  const double sum2 = (big_a + re_b) * (big_a + re_b) + im_b * im_b;
  const double det2 =
      cf * cf * si * si + sf * sf * ci * ci - 2.0 * ci * si * cf * sf * std::cos(phi);
  const double p_f = std::max(sum2 + cross * em1, 0.0);
  const double p_fail = std::max(det2 - cross * em1, 0.0);
  if (!(p_f > 1e-300)) {
    throw degeneracy_error("post-selection probability underflow: p_f <= 1e-300");
  }

  const double d2 = delta_m * delta_m;
  // A^2 + |B|^2 - 2 A Re(B) e^{-2x}(1-4x), rearranged so the x -> 0 limit is
  // free of cancellation: (A-ReB)^2 + ImB^2 + 2 A ReB [4x e^{-2x} - expm1(-2x)].
  const double quad =
      (big_a - re_b) * (big_a - re_b) + im_b * im_b + cross * (4.0 * x * em2x - em1);
  const double sub = 16.0 * big_a * big_a * re_b * re_b * x * em2x * em2x;
  const double fm = 4.0 * d2 * (quad - sub / p_f);

  const double g = g_delta / delta_m;
  const double dp_fail = 8.0 * g * d2 * big_a * re_b * em2x;  // -dp_f/dg
  double fpf = 0.0;
  if (p_f < kProbabilityFloor || p_fail < kProbabilityFloor) {
    if (std::abs(dp_fail) >= kDerivativeFloor) {
      throw degeneracy_error(
          "success probability saturates while its coupling derivative does not vanish");
    }
  } else {
    fpf = 64.0 * x * d2 * big_a * big_a * re_b * re_b * em2x * em2x / (p_f * p_fail);
  }

  FisherReport report{};
  report.qfi = 4.0 * d2;
  report.fm = fm;
  report.fpf = fpf;
  report.fps = fm + fpf;
  report.p_f = p_f;
  report.delta = std::sqrt(sum2);
  const std::complex<double> c(big_a + re_b, im_b);
  const std::complex<double> num(big_a - re_b, -im_b);
  if (std::abs(c) < 1e-14) {
    report.weak_value = {std::numeric_limits<double>::infinity(), 0.0};
    report.weak_value_divergent = true;
  } else {
    report.weak_value = num / c;
    report.weak_value_divergent = false;
  }
  return report;
}

Eigen::VectorXcd unitary_dft(const Eigen::VectorXcd& v) {
  const Eigen::Index n = v.size();
  if (n == 0) throw std::invalid_argument("empty vector in unitary_dft");
  std::vector<std::complex<double>> twiddle(static_cast<std::size_t>(n));
  const double base = -2.0 * std::numbers::pi / static_cast<double>(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    twiddle[static_cast<std::size_t>(t)] =
        std::polar(1.0, base * static_cast<double>(t));
  }
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  Eigen::VectorXcd out(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      acc += v[j] * twiddle[static_cast<std::size_t>((j * k) % n)];
    }
    out[k] = acc * scale;
  }
  return out;
}

}  // namespace wva
