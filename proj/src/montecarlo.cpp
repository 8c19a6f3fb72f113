#include "wva/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "wva/errors.hpp"
#include "wva/parallel.hpp"
#include "wva/protocol.hpp"
#include "wva/rng.hpp"

namespace wva {

namespace {

constexpr std::uint64_t kTrialChunk = 65536;
constexpr double kLikelihoodFloor = 1e-300;

const char* basis_tag(MeasurementBasis basis) {
  switch (basis) {
    case MeasurementBasis::meter_eigenbasis:
      return "meter";
    case MeasurementBasis::conjugate_basis:
      return "conjugate";
    case MeasurementBasis::counts_only:
      return "counts";
  }
  return "unknown";
}

// Outcome tallies: the likelihood depends on the dataset only through these.
struct Histogram {
  std::vector<std::uint64_t> cell;
  std::uint64_t plain_success = 0;  // successes without a readout cell
  std::uint64_t fail = 0;
};

Histogram build_histogram(const ExperimentDataset& dataset, std::size_t n_cells) {
  Histogram hist;
  hist.cell.assign(n_cells, 0);
  for (std::size_t t = 0; t < dataset.trials.size(); ++t) {
    const TrialRecord& rec = dataset.trials[t];
    if (!rec.postselected) {
      ++hist.fail;
    } else if (rec.outcome_index == kNoOutcome) {
      ++hist.plain_success;
    } else if (rec.outcome_index < n_cells) {
      ++hist.cell[rec.outcome_index];
    } else {
      throw std::invalid_argument("outcome index out of grid bounds at trial " +
                                  std::to_string(t));
    }
  }
  return hist;
}

double histogram_loglik(const Histogram& hist, const OutcomeDistribution& dist) {
  long double acc = 0.0L;
  for (std::size_t j = 0; j < hist.cell.size(); ++j) {
    if (hist.cell[j] == 0) continue;
    acc += static_cast<long double>(hist.cell[j]) *
           std::log(std::max(dist.probs[static_cast<Eigen::Index>(j)], kLikelihoodFloor));
  }
  if (hist.plain_success > 0) {
    acc += static_cast<long double>(hist.plain_success) *
           std::log(std::max(dist.p_f, kLikelihoodFloor));
  }
  if (hist.fail > 0) {
    acc += static_cast<long double>(hist.fail) * std::log(std::max(dist.p_fail, kLikelihoodFloor));
  }
  return static_cast<double>(acc);
}

// Probabilities with first and second g-derivatives, all analytic through the
// kernel triple (o, q, r2).
struct DistributionDerivatives {
  Eigen::VectorXd p, dp, d2p;
  double p_f, p_fail, dp_f, d2p_f;
};

DistributionDerivatives outcome_derivatives(const ExperimentConfig& config, double g) {
  const PostselectionMoments mom =
      postselection_moments(config.psi_i, config.psi_f, config.a, config.meter, g);
  const MeterKernels mk = meter_kernel_set(config.psi_i, config.psi_f, config.a, config.meter, g);
  const Eigen::VectorXd& amp = config.meter.amplitudes();
  const Eigen::Index n = amp.size();

  DistributionDerivatives out;
  out.p_f = mom.p_f;
  out.p_fail = mom.p_fail;
  out.dp_f = -2.0 * mom.qo.imag();
  long double or2 = 0.0L;  // Re sum_j conj(o_j) r2_j phi_j^2
  for (Eigen::Index j = 0; j < n; ++j) {
    or2 += static_cast<long double>((std::conj(mk.o[j]) * mk.r2[j]).real()) * amp[j] * amp[j];
  }
  out.d2p_f = 2.0 * (mom.qq - static_cast<double>(or2));

  if (config.basis == MeasurementBasis::counts_only) return out;

  out.p.resize(n);
  out.dp.resize(n);
  out.d2p.resize(n);
  if (config.basis == MeasurementBasis::meter_eigenbasis) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double w = amp[j] * amp[j];
      out.p[j] = std::norm(mk.o[j]) * w;
      out.dp[j] = 2.0 * (std::conj(mk.o[j]) * mk.q[j]).imag() * w;
      out.d2p[j] = 2.0 * (std::norm(mk.q[j]) - (std::conj(mk.o[j]) * mk.r2[j]).real()) * w;
    }
  } else {
    const Eigen::VectorXcd ampc = amp.cast<std::complex<double>>();
    const std::complex<double> mi(0.0, -1.0);
    const Eigen::VectorXcd t0 = unitary_dft(mk.o.cwiseProduct(ampc));
    const Eigen::VectorXcd t1 = unitary_dft((mi * mk.q).cwiseProduct(ampc));
    const Eigen::VectorXcd t2 = unitary_dft((-mk.r2).cwiseProduct(ampc));
    for (Eigen::Index k = 0; k < n; ++k) {
      out.p[k] = std::norm(t0[k]);
      out.dp[k] = 2.0 * (std::conj(t0[k]) * t1[k]).real();
      out.d2p[k] = 2.0 * (std::norm(t1[k]) + (std::conj(t0[k]) * t2[k]).real());
    }
  }
  return out;
}

struct Score {
  double s1 = 0.0;  // d loglik / dg
  double s2 = 0.0;  // d^2 loglik / dg^2
  bool usable = true;
};

Score histogram_score(const Histogram& hist, const DistributionDerivatives& der) {
  Score sc;
  long double s1 = 0.0L, s2 = 0.0L;
  auto add = [&](std::uint64_t count, double p, double dp, double d2p) {
    if (count == 0) return;
    if (!(p > kLikelihoodFloor)) {
      sc.usable = false;
      return;
    }
    const long double r = static_cast<long double>(dp) / p;
    s1 += static_cast<long double>(count) * r;
    s2 += static_cast<long double>(count) * (static_cast<long double>(d2p) / p - r * r);
  };
  for (std::size_t j = 0; j < hist.cell.size(); ++j) {
    const auto idx = static_cast<Eigen::Index>(j);
    add(hist.cell[j], der.p[idx], der.dp[idx], der.d2p[idx]);
  }
  add(hist.plain_success, der.p_f, der.dp_f, der.d2p_f);
  add(hist.fail, der.p_fail, -der.dp_f, -der.d2p_f);
  sc.s1 = static_cast<double>(s1);
  sc.s2 = static_cast<double>(s2);
  if (!std::isfinite(sc.s1) || !std::isfinite(sc.s2)) sc.usable = false;
  return sc;
}

}  // namespace

OutcomeDistribution outcome_distribution(const ExperimentConfig& config, double g) {
  const PostselectionMoments mom =
      postselection_moments(config.psi_i, config.psi_f, config.a, config.meter, g);
  OutcomeDistribution out;
  out.p_f = std::max(mom.p_f, 0.0);
  out.p_fail = std::max(mom.p_fail, 0.0);
  if (config.basis == MeasurementBasis::counts_only) return out;

  const MeterFunctions mf =
      meter_functions(config.psi_i, config.psi_f, config.a, config.meter, g);
  const Eigen::VectorXcd cond =
      mf.o.cwiseProduct(config.meter.amplitudes().cast<std::complex<double>>());
  if (config.basis == MeasurementBasis::meter_eigenbasis) {
    out.probs = cond.cwiseAbs2();
  } else {
    out.probs = unitary_dft(cond).cwiseAbs2();
  }
  return out;
}

ExperimentDataset sample_dataset(const ExperimentConfig& config, std::uint64_t nu,
                                 std::uint64_t seed, unsigned threads) {
  if (nu < 1) throw std::invalid_argument("at least one trial is required");
  const OutcomeDistribution dist = outcome_distribution(config, config.g_true);
  const Eigen::Index n = dist.probs.size();
  std::vector<double> cum(static_cast<std::size_t>(n));
  long double acc = 0.0L;
  for (Eigen::Index j = 0; j < n; ++j) {
    acc += dist.probs[j];
    cum[static_cast<std::size_t>(j)] = static_cast<double>(acc);
  }
  const double success_edge = n > 0 ? cum.back() : dist.p_f;

  ExperimentDataset ds{config, seed, std::vector<TrialRecord>(nu)};
  const std::uint64_t n_chunks = (nu + kTrialChunk - 1) / kTrialChunk;
  parallel_for(static_cast<std::size_t>(n_chunks), threads, [&](std::size_t chunk) {
    Xoshiro256StarStar rng(
        derive_stream_seed(seed, StreamDomain::trial_chunk, static_cast<std::uint64_t>(chunk)));
    const std::uint64_t begin = static_cast<std::uint64_t>(chunk) * kTrialChunk;
    const std::uint64_t end = std::min(nu, begin + kTrialChunk);
    for (std::uint64_t t = begin; t < end; ++t) {
      const double u = rng.uniform01();
      TrialRecord rec{};
      if (u < success_edge) {
        rec.postselected = true;
        if (n > 0) {
          const auto it = std::upper_bound(cum.begin(), cum.end(), u);
          rec.outcome_index = static_cast<std::uint32_t>(it - cum.begin());
        } else {
          rec.outcome_index = kNoOutcome;
        }
      } else {
        rec.postselected = false;
        rec.outcome_index = kNoOutcome;
      }
      ds.trials[t] = rec;
    }
  });
  return ds;
}

double log_likelihood(const ExperimentDataset& dataset, double g) {
  const OutcomeDistribution dist = outcome_distribution(dataset.config, g);
  const Eigen::Index n = dist.probs.size();
  Eigen::VectorXd logp(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    logp[j] = std::log(std::max(dist.probs[j], kLikelihoodFloor));
  }
  const double log_pf = std::log(std::max(dist.p_f, kLikelihoodFloor));
  const double log_pfail = std::log(std::max(dist.p_fail, kLikelihoodFloor));
  long double acc = 0.0L;
  for (std::size_t t = 0; t < dataset.trials.size(); ++t) {
    const TrialRecord& rec = dataset.trials[t];
    double term;
    if (!rec.postselected) {
      term = log_pfail;
    } else if (rec.outcome_index == kNoOutcome) {
      term = log_pf;
    } else if (rec.outcome_index < static_cast<std::uint32_t>(n)) {
      term = logp[static_cast<Eigen::Index>(rec.outcome_index)];
    } else {
      throw std::invalid_argument("outcome index out of grid bounds at trial " +
                                  std::to_string(t));
    }
    if (!std::isfinite(term)) {
      throw degeneracy_error("non-finite log-likelihood contribution at trial " +
                             std::to_string(t));
    }
    acc += term;
  }
  return static_cast<double>(acc);
}

double aliasing_limit(const HermitianObservable& a, const MeterModel& meter) {
  const double range = a.eigenvalues().maxCoeff() - a.eigenvalues().minCoeff();
  const double m_max = meter.max_abs_grid();
  if (!(range * m_max > 0.0)) return std::numeric_limits<double>::infinity();
  return std::numbers::pi / (range * m_max);
}

MleResult mle_estimate(const ExperimentDataset& dataset,
                       std::optional<std::pair<double, double>> bracket) {
  if (dataset.trials.empty()) {
    throw std::invalid_argument("cannot estimate from an empty dataset");
  }
  const ExperimentConfig& config = dataset.config;
  const double alias = aliasing_limit(config.a, config.meter);
  double lo = 0.0;
  double hi;
  if (bracket) {
    lo = bracket->first;
    hi = bracket->second;
    if (!(lo >= 0.0) || !(hi > lo) || !(hi < alias)) {
      throw std::invalid_argument("bracket must satisfy 0 <= lo < hi < aliasing limit");
    }
  } else {
    hi = std::min(3.0 * std::abs(config.g_true), 0.9 * alias);
    if (!(hi > 0.0) || !std::isfinite(hi)) {
      if (std::isfinite(alias)) {
        hi = 0.9 * alias;
      } else {
        throw std::invalid_argument(
            "no default bracket derivable (zero coupling guess, unbounded aliasing limit)");
      }
    }
  }

  const std::size_t n_cells = config.basis == MeasurementBasis::counts_only
                                  ? 0
                                  : static_cast<std::size_t>(config.meter.points());
  const Histogram hist = build_histogram(dataset, n_cells);
  auto loglik = [&](double g) {
    return histogram_loglik(hist, outcome_distribution(config, g));
  };

  // Golden-section ascent to 1e-6 of the bracket width.
  constexpr double kInvPhi = 0.6180339887498949;
  const double tol = 1e-6 * (hi - lo);
  double a_ = lo, b = hi;
  double c = b - kInvPhi * (b - a_);
  double d = a_ + kInvPhi * (b - a_);
  double fc = loglik(c);
  double fd = loglik(d);
  int iterations = 0;
  while (b - a_ > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a_);
      fc = loglik(c);
    } else {
      a_ = c;
      c = d;
      fc = fd;
      d = a_ + kInvPhi * (b - a_);
      fd = loglik(d);
    }
    ++iterations;
  }
  double g_hat = 0.5 * (a_ + b);
  double best = loglik(g_hat);

  // Newton refinements on the analytic score; each accepted step must not
  // lower the likelihood.
  for (int k = 0; k < 5; ++k) {
    const Score sc = histogram_score(hist, outcome_derivatives(config, g_hat));
    ++iterations;
    if (!sc.usable || !(sc.s2 < 0.0)) break;
    const double next = std::clamp(g_hat - sc.s1 / sc.s2, lo, hi);
    const double ll = loglik(next);
    if (!(ll >= best)) break;
    g_hat = next;
    best = ll;
  }

  MleResult out{};
  out.g_hat = g_hat;
  out.loglik_at_max = best;
  out.iterations = iterations;
  out.bracket = {lo, hi};
  out.at_boundary = (g_hat - lo <= 2.0 * tol) || (hi - g_hat <= 2.0 * tol);
  return out;
}

CrbReport crb_report(const ExperimentConfig& config, std::uint64_t nu, int replicas,
                     std::uint64_t seed, unsigned threads) {
  if (replicas < 30) {
    throw std::invalid_argument("at least 30 replicas are required");
  }
  if (nu < 1) throw std::invalid_argument("at least one trial is required");

  const double fisher = measurement_fisher(config.psi_i, config.psi_f, config.a, config.meter,
                                           config.g_true, config.basis);
  const double qfi = qfi_coupling(config.psi_i, config.a, config.meter);
  const bool degenerate = !(fisher > 1e-12 * std::max(1.0, qfi));
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<double> estimates(static_cast<std::size_t>(replicas), nan);
  std::vector<std::uint64_t> successes(static_cast<std::size_t>(replicas), 0);
  parallel_for(static_cast<std::size_t>(replicas), threads, [&](std::size_t r) {
    const std::uint64_t replica_seed =
        derive_stream_seed(seed, StreamDomain::replica, static_cast<std::uint64_t>(r));
    const ExperimentDataset ds = sample_dataset(config, nu, replica_seed, 1);
    std::uint64_t s = 0;
    for (const TrialRecord& rec : ds.trials) s += rec.postselected ? 1 : 0;
    successes[r] = s;
    if (!degenerate) estimates[r] = mle_estimate(ds).g_hat;
  });

  CrbReport rep{};
  rep.g_true = config.g_true;
  rep.fisher = fisher;
  rep.nu = nu;
  rep.replicas = replicas;
  rep.degenerate = degenerate;
  long double s_total = 0.0L;
  for (std::uint64_t s : successes) s_total += s;
  rep.success_fraction = static_cast<double>(
      s_total / (static_cast<long double>(nu) * static_cast<long double>(replicas)));

  if (degenerate) {
    rep.mean = rep.bias = rep.std_dev = rep.crb_std = rep.ratio = nan;
    return rep;
  }
  long double mean = 0.0L;
  for (double e : estimates) mean += e;
  mean /= static_cast<long double>(estimates.size());
  long double var = 0.0L;
  for (double e : estimates) {
    const long double d = e - mean;
    var += d * d;
  }
  var /= static_cast<long double>(estimates.size() - 1);
  rep.mean = static_cast<double>(mean);
  rep.bias = rep.mean - config.g_true;
  rep.std_dev = static_cast<double>(sqrtl(var));
  rep.crb_std = 1.0 / std::sqrt(static_cast<double>(nu) * fisher);
  rep.ratio = rep.std_dev / rep.crb_std;
  rep.estimates = std::move(estimates);
  return rep;
}

std::string dataset_to_text(const ExperimentDataset& dataset) {
  std::ostringstream os;
  os << "# wva-dataset v1\n";
  os << "# generator: " << kGeneratorName << "\n";
  os << "# seed: " << dataset.seed << "\n";
  os << "# config: g_true=" << std::setprecision(17) << dataset.config.g_true
     << " basis=" << basis_tag(dataset.config.basis) << " dim=" << dataset.config.a.dim()
     << " meter_points=" << dataset.config.meter.points()
     << " meter_delta=" << dataset.config.meter.delta() << " trials=" << dataset.trials.size()
     << "\n";
  for (std::size_t t = 0; t < dataset.trials.size(); ++t) {
    const TrialRecord& rec = dataset.trials[t];
    os << t << ' ' << (rec.postselected ? 1 : 0) << ' ';
    if (rec.outcome_index == kNoOutcome) {
      os << -1;
    } else {
      os << rec.outcome_index;
    }
    os << '\n';
  }
  return os.str();
}

DatasetRecords dataset_records_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  DatasetRecords out{};
  bool header_seen = false;
  bool seed_seen = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line_no == 1) {
        if (line != "# wva-dataset v1") {
          throw std::invalid_argument("unrecognized dataset header: " + line);
        }
        header_seen = true;
      } else if (line.rfind("# generator: ", 0) == 0) {
        out.generator = line.substr(13);
      } else if (line.rfind("# seed: ", 0) == 0) {
        out.seed = std::stoull(line.substr(8));
        seed_seen = true;
      }
      continue;
    }
    if (!header_seen) {
      throw std::invalid_argument("dataset text must start with '# wva-dataset v1'");
    }
    std::istringstream ls(line);
    long long index = 0, flag = 0, outcome = 0;
    if (!(ls >> index >> flag >> outcome) || (flag != 0 && flag != 1) || outcome < -1) {
      throw std::invalid_argument("malformed trial record at line " + std::to_string(line_no));
    }
    TrialRecord rec{};
    rec.postselected = flag == 1;
    rec.outcome_index = outcome < 0 ? kNoOutcome : static_cast<std::uint32_t>(outcome);
    out.trials.push_back(rec);
  }
  if (!header_seen || !seed_seen) {
    throw std::invalid_argument("dataset text is missing its metadata header");
  }
  return out;
}

}  // namespace wva
