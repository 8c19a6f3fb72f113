#ifndef WVA_REPORT_HPP
#define WVA_REPORT_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace wva {

inline constexpr const char* kToolVersion = "1.0.0";

// Front-end run modes. The command line uses the hyphenated names
// (report, sweep-fig1, sweep-fig2, series-check, montecarlo); a config file
// may repeat the mode, in which case it must match the subcommand.
enum class RunMode { report, sweep_fig1, sweep_fig2, series_check, montecarlo };

std::string mode_name(RunMode mode);

// Flat run configuration. Two-level protocol with A = sigma_z, parametrized
// by Bloch angles; the pre-selection phase is fixed to zero (only the
// relative phase `phi` enters any reported quantity).
struct RunConfig {
  RunMode mode = RunMode::report;
  double theta_i = 0.0;
  std::optional<double> theta_f;
  std::optional<double> phi;
  std::string postselection = "optimal";  // optimal | identity | pair
  std::optional<double> g;
  std::optional<double> g_delta;
  double meter_delta = 1.0;
  int meter_points = 2001;
  double meter_half_width = 8.0;
  std::optional<std::string> basis;  // meter | conjugate | counts
  int points = 0;                    // 0 = mode default (500 fig1, 601 fig2)
  std::vector<double> g_delta_list;  // sweep-fig2; default {1e-1, 1e-2, 1e-3}
  std::vector<double> g_list;        // series-check; default 3e-2 * 2^-k, k=0..4
  std::uint64_t nu = 100000;
  int replicas = 100;
  std::uint64_t seed = 20260819;
  unsigned threads = 1;
  std::string out;  // empty = stdout
  std::optional<std::string> dataset_out;
};

// Parses and validates a flat JSON config against the mode given on the
// command line. Unknown keys, keys that do not apply to the mode, type
// mismatches, and inconsistent combinations all raise config_error.
RunConfig parse_run_config(const std::string& json_text, const std::string& cli_mode);

// Command-line overrides, validated with the same applicability rules.
void apply_overrides(RunConfig& config, const std::optional<std::string>& out,
                     const std::optional<std::uint64_t>& seed,
                     const std::optional<unsigned>& threads);

struct Fig1Row {
  double theta_i;
  double fm_over_qfi;
  double fpf_over_qfi;
  double fps_over_qfi;
};

struct Fig2Row {
  double theta_f;
  double g_delta;
  double fm_over_qfi;
  double fps_over_qfi;
};

// Information budget of the optimal post-selection versus the pre-selection
// angle, at fixed g*delta (default 0.1), on a uniform open grid over (0, pi).
std::vector<Fig1Row> compute_fig1_rows(const RunConfig& config);

// Information budget versus the post-selection angle at phi = pi, one row
// group per g*delta value. A refined window around the readout-information
// dip at theta_f = pi - theta_i supplements the base grid so the dip is
// resolved at every coupling; rows are sorted by (g_delta, theta_f).
std::vector<Fig2Row> compute_fig2_rows(const RunConfig& config);

// Executes the configured run. `text` is the main artifact (JSON document or
// CSV table); `dataset_text` is filled for montecarlo runs that request a
// dataset export.
struct RunArtifact {
  std::string text;
  std::optional<std::string> dataset_text;
};

RunArtifact execute_run(const RunConfig& config);

// Full command-line entry point: subcommand + flag parsing, config load,
// dispatch, output writing. Returns the process exit code (0 success,
// 2 configuration error, 3 numeric degeneracy, 1 anything else).
int run_main(int argc, char** argv);

}  // namespace wva

#endif  // WVA_REPORT_HPP
