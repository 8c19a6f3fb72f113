#ifndef WVA_MONTECARLO_HPP
#define WVA_MONTECARLO_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wva/fisher.hpp"
#include "wva/meter.hpp"
#include "wva/observable.hpp"
#include "wva/state.hpp"

namespace wva {

// Simulation of the conditional-measurement experiment: per trial, the
// post-selection either succeeds (probability p_f(g_true), conditional
// readout recorded in the chosen basis) or fails (only the failure counted).

struct ExperimentConfig {
  SystemState psi_i;
  SystemState psi_f;
  HermitianObservable a;
  MeterModel meter;
  double g_true;
  MeasurementBasis basis;
};

// Sentinel for "no readout cell": failed trials, and successes under
// counts-only measurement.
inline constexpr std::uint32_t kNoOutcome = 0xFFFFFFFFu;

struct TrialRecord {
  bool postselected;
  std::uint32_t outcome_index;
};

struct ExperimentDataset {
  ExperimentConfig config;
  std::uint64_t seed;
  std::vector<TrialRecord> trials;
};

// Joint outcome probabilities at coupling g: probs[k] = P(success and cell k)
// in the configured basis (empty for counts-only), with the success/fail
// marginals evaluated on the cancellation-free path.
struct OutcomeDistribution {
  Eigen::VectorXd probs;
  double p_f;
  double p_fail;
};

OutcomeDistribution outcome_distribution(const ExperimentConfig& config, double g);

// Draws nu independent trials. Trials are generated in fixed-size chunks,
// each on its own counter-derived RNG stream, so the result is bit-for-bit
// reproducible and independent of the worker count.
ExperimentDataset sample_dataset(const ExperimentConfig& config, std::uint64_t nu,
                                 std::uint64_t seed, unsigned threads = 1);

// Sum over trials of log P(record | g), with a 1e-300 probability floor.
double log_likelihood(const ExperimentDataset& dataset, double g);

// Coupling beyond which grid phases wrap: pi / (eigenvalue range * max |m|).
double aliasing_limit(const HermitianObservable& a, const MeterModel& meter);

struct MleResult {
  double g_hat;
  double loglik_at_max;
  int iterations;
  std::pair<double, double> bracket;
  bool at_boundary;  // maximum pinned at a bracket endpoint: widen the bracket
};

// Maximum-likelihood estimate of g: golden-section search to 1e-6 of the
// bracket width, then up to 5 Newton refinements on the analytic score.
// Default bracket [0, min(3 g_true, 0.9 * aliasing_limit)].
MleResult mle_estimate(const ExperimentDataset& dataset,
                       std::optional<std::pair<double, double>> bracket = std::nullopt);

struct CrbReport {
  double g_true;
  double mean;
  double bias;
  double std_dev;   // across replicas, ddof = 1
  double crb_std;   // 1 / sqrt(nu * fisher)
  double ratio;     // std_dev / crb_std; NaN when degenerate
  double fisher;    // classical Fisher information of the simulated measurement
  double success_fraction;
  std::uint64_t nu;
  int replicas;
  bool degenerate;  // fisher vanishes: no bound to compare against
  std::vector<double> estimates;
};

// Empirical check of the estimation variance against 1/sqrt(nu * F): samples
// `replicas` independent datasets on derived streams and runs the estimator
// on each.
CrbReport crb_report(const ExperimentConfig& config, std::uint64_t nu, int replicas,
                     std::uint64_t seed, unsigned threads = 1);

// One record per line ("index postselected outcome", -1 for no readout cell)
// under a metadata header carrying the generator name, seed, and a config
// summary.
std::string dataset_to_text(const ExperimentDataset& dataset);

struct DatasetRecords {
  std::uint64_t seed;
  std::string generator;
  std::vector<TrialRecord> trials;
};

DatasetRecords dataset_records_from_text(const std::string& text);

}  // namespace wva

#endif  // WVA_MONTECARLO_HPP
