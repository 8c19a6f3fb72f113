#include "wva/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string_view>
#include <utility>

#include "wva/errors.hpp"
#include "wva/fisher.hpp"
#include "wva/meter.hpp"
#include "wva/montecarlo.hpp"
#include "wva/observable.hpp"
#include "wva/parallel.hpp"
#include "wva/protocol.hpp"
#include "wva/rng.hpp"
#include "wva/series.hpp"
#include "wva/state.hpp"

namespace wva {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr unsigned kInReport = 1u << 0;
constexpr unsigned kInFig1 = 1u << 1;
constexpr unsigned kInFig2 = 1u << 2;
constexpr unsigned kInSeries = 1u << 3;
constexpr unsigned kInMc = 1u << 4;
constexpr unsigned kInAll = kInReport | kInFig1 | kInFig2 | kInSeries | kInMc;

unsigned mode_bit(RunMode mode) {
  switch (mode) {
    case RunMode::report: return kInReport;
    case RunMode::sweep_fig1: return kInFig1;
    case RunMode::sweep_fig2: return kInFig2;
    case RunMode::series_check: return kInSeries;
    case RunMode::montecarlo: return kInMc;
  }
  return 0;
}

// Which config keys each mode accepts; anything else is rejected up front.
const std::vector<std::pair<std::string_view, unsigned>>& key_table() {
  static const std::vector<std::pair<std::string_view, unsigned>> table = {
      {"mode", kInAll},
      {"theta_i", kInReport | kInFig2 | kInSeries | kInMc},
      {"theta_f", kInReport | kInSeries | kInMc},
      {"phi", kInReport | kInSeries | kInMc},
      {"postselection", kInReport | kInSeries | kInMc},
      {"g", kInReport | kInMc},
      {"g_delta", kInReport | kInFig1 | kInMc},
      {"meter_delta", kInAll},
      {"meter_points", kInAll},
      {"meter_half_width", kInAll},
      {"basis", kInReport | kInMc},
      {"points", kInFig1 | kInFig2},
      {"g_delta_list", kInFig2},
      {"g_list", kInSeries},
      {"nu", kInMc},
      {"replicas", kInMc},
      {"seed", kInMc},
      {"threads", kInFig1 | kInFig2 | kInMc},
      {"out", kInAll},
      {"dataset_out", kInMc},
  };
  return table;
}

RunMode mode_from_name(const std::string& name) {
  if (name == "report") return RunMode::report;
  if (name == "sweep-fig1") return RunMode::sweep_fig1;
  if (name == "sweep-fig2") return RunMode::sweep_fig2;
  if (name == "series-check") return RunMode::series_check;
  if (name == "montecarlo") return RunMode::montecarlo;
  throw config_error("unknown mode '" + name + "'");
}

MeasurementBasis basis_from_name(const std::string& name) {
  if (name == "meter") return MeasurementBasis::meter_eigenbasis;
  if (name == "conjugate") return MeasurementBasis::conjugate_basis;
  if (name == "counts") return MeasurementBasis::counts_only;
  throw config_error("config key 'basis' must be one of meter|conjugate|counts");
}

double require_number(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw config_error("config key '" + key + "' must be a number");
  double x = v.get<double>();
  if (!std::isfinite(x)) throw config_error("config key '" + key + "' must be finite");
  return x;
}

std::int64_t require_integer(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) throw config_error("config key '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

std::uint64_t require_unsigned(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
    throw config_error("config key '" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string require_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw config_error("config key '" + key + "' must be a string");
  return v.get<std::string>();
}

std::vector<double> require_number_list(const nlohmann::json& v, const std::string& key) {
  if (!v.is_array() || v.empty())
    throw config_error("config key '" + key + "' must be a non-empty array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    double x = require_number(e, key);
    if (x <= 0.0) throw config_error("config key '" + key + "' entries must be positive");
    out.push_back(x);
  }
  return out;
}

void require_angle(double x, const std::string& key) {
  if (x < 0.0 || x > std::numbers::pi)
    throw config_error("config key '" + key + "' must lie in [0, pi]");
}

std::vector<double> default_g_list() {
  std::vector<double> gs;
  for (int k = 0; k < 5; ++k) gs.push_back(3e-2 * std::pow(2.0, -k));
  return gs;
}

// Protocol pieces shared by report, series-check, and montecarlo runs.
struct ResolvedProtocol {
  SystemState psi_i;
  HermitianObservable a;
  PostSelection ps;
  double theta_f_eff;  // Bloch angles of the effective final state
  double phi_eff;
};

ResolvedProtocol resolve_protocol(const RunConfig& config) {
  SystemState psi_i = bloch_state(QubitAngles(config.theta_i, 0.0));
  HermitianObservable a = pauli_z();
  if (config.postselection == "optimal") {
    PostSelection ps = optimal_postselection(psi_i, a);
    return {std::move(psi_i), std::move(a), std::move(ps), config.theta_i, std::numbers::pi};
  }
  if (config.postselection == "identity") {
    PostSelection ps = pair_postselection(psi_i, psi_i);
    return {std::move(psi_i), std::move(a), std::move(ps), config.theta_i, 0.0};
  }
  SystemState psi_f = bloch_state(QubitAngles(*config.theta_f, *config.phi));
  PostSelection ps = pair_postselection(psi_i, psi_f);
  return {std::move(psi_i), std::move(a), std::move(ps), *config.theta_f, *config.phi};
}

MeterModel make_meter(const RunConfig& config) {
  return gaussian_meter(config.meter_delta, config.meter_points, config.meter_half_width);
}

std::string format_csv_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string iso_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Resolved configuration echo: fixed key order per mode, defaults applied.
ordered_json config_echo(const RunConfig& config) {
  ordered_json e;
  e["mode"] = mode_name(config.mode);
  switch (config.mode) {
    case RunMode::report:
    case RunMode::series_check:
    case RunMode::montecarlo:
      e["theta_i"] = config.theta_i;
      if (config.theta_f) e["theta_f"] = *config.theta_f;
      if (config.phi) e["phi"] = *config.phi;
      e["postselection"] = config.postselection;
      break;
    case RunMode::sweep_fig2:
      e["theta_i"] = config.theta_i;
      break;
    case RunMode::sweep_fig1:
      break;
  }
  if (config.mode == RunMode::report || config.mode == RunMode::montecarlo) e["g"] = *config.g;
  if (config.mode == RunMode::sweep_fig1) e["g_delta"] = *config.g_delta;
  if (config.mode == RunMode::sweep_fig2) e["g_delta_list"] = config.g_delta_list;
  if (config.mode == RunMode::series_check) e["g_list"] = config.g_list;
  e["meter_delta"] = config.meter_delta;
  e["meter_points"] = config.meter_points;
  e["meter_half_width"] = config.meter_half_width;
  if (config.mode == RunMode::report && config.basis) e["basis"] = *config.basis;
  if (config.mode == RunMode::montecarlo) e["basis"] = *config.basis;
  if (config.mode == RunMode::sweep_fig1 || config.mode == RunMode::sweep_fig2)
    e["points"] = config.points;
  if (config.mode == RunMode::montecarlo) {
    e["nu"] = config.nu;
    e["replicas"] = config.replicas;
    e["seed"] = config.seed;
  }
  if (mode_bit(config.mode) & (kInFig1 | kInFig2 | kInMc)) e["threads"] = config.threads;
  // Output locations are deliberately not echoed: the echo (and the hash
  // derived from it) identifies the computation, so a rerun routed to a
  // different path stays byte-identical apart from the timestamp.
  return e;
}

std::string json_document(const RunConfig& config, ordered_json results) {
  ordered_json doc;
  doc["tool"] = "wva";
  doc["version"] = kToolVersion;
  doc["mode"] = mode_name(config.mode);
  doc["timestamp"] = iso_utc_now();
  ordered_json echo = config_echo(config);
  if (config.mode == RunMode::montecarlo) {
    doc["generator"] = kGeneratorName;
    doc["seed"] = config.seed;
    doc["config_hash"] = hex64(fnv1a64(echo.dump()));
  }
  doc["config"] = std::move(echo);
  doc["results"] = std::move(results);
  return doc.dump(2) + "\n";
}

std::string csv_document(const RunConfig& config, const std::string& header,
                         const std::vector<std::string>& rows) {
  std::string text = "# wva ";
  text += kToolVersion;
  text += ' ';
  text += mode_name(config.mode);
  text += "\n# config: ";
  text += config_echo(config).dump();
  text += '\n';
  text += header;
  text += '\n';
  for (const auto& row : rows) {
    text += row;
    text += '\n';
  }
  return text;
}

const char* regime_name(RegimeKind kind) {
  switch (kind) {
    case RegimeKind::a_counts_dominated: return "counts_dominated";
    case RegimeKind::b_meter_dominated: return "meter_dominated";
    case RegimeKind::crossover: return "crossover";
  }
  return "crossover";
}

ordered_json report_results(const RunConfig& config) {
  ResolvedProtocol rp = resolve_protocol(config);
  MeterModel meter = make_meter(config);
  const double g = *config.g;
  FisherReport rep = fps_total(rp.psi_i, rp.ps.psi_f, rp.a, meter, g);
  PostselectionMoments moms = postselection_moments(rp.psi_i, rp.ps.psi_f, rp.a, meter, g);
  RegimeLabel regime = regime_classify(rp.psi_i, rp.a, meter, g);
  FisherReport closed = qubit_closed_forms(config.theta_i, rp.theta_f_eff, rp.phi_eff,
                                           g * config.meter_delta, config.meter_delta);
  ordered_json r;
  r["delta"] = rep.delta;
  r["delta_signed"] = rp.ps.delta;
  r["p_f"] = rep.p_f;
  r["p_fail"] = moms.p_fail;
  if (rep.weak_value_divergent) {
    r["weak_value"] = nullptr;
  } else {
    ordered_json wv;
    wv["re"] = rep.weak_value.real();
    wv["im"] = rep.weak_value.imag();
    r["weak_value"] = std::move(wv);
  }
  r["weak_value_divergent"] = rep.weak_value_divergent;
  r["qfi"] = rep.qfi;
  r["fm"] = rep.fm;
  r["fpf"] = rep.fpf;
  r["fps"] = rep.fps;
  r["fm_over_qfi"] = rep.fm / rep.qfi;
  r["fpf_over_qfi"] = rep.fpf / rep.qfi;
  r["fps_over_qfi"] = rep.fps / rep.qfi;
  {
    ordered_json rg;
    rg["label"] = regime_name(regime.label);
    rg["ratio"] = regime.ratio;
    rg["epsilon"] = regime.epsilon;
    rg["g_aw_delta"] = regime.g_aw_delta;
    r["regime"] = std::move(rg);
  }
  {
    ordered_json cf;
    cf["p_f"] = closed.p_f;
    cf["fm"] = closed.fm;
    cf["fpf"] = closed.fpf;
    cf["fps"] = closed.fps;
    r["closed_form"] = std::move(cf);
  }
  if (config.basis) {
    ordered_json mf;
    mf["basis"] = *config.basis;
    mf["value"] =
        measurement_fisher(rp.psi_i, rp.ps.psi_f, rp.a, meter, g, basis_from_name(*config.basis));
    r["measurement_fisher"] = std::move(mf);
  }
  return r;
}

ordered_json series_results(const RunConfig& config) {
  ResolvedProtocol rp = resolve_protocol(config);
  // Grid-moment meter: the expansion's pointer moments and the exact readout
  // moments must describe the identical discretized pointer, otherwise the
  // quadrature gap between grid and ideal-Gaussian moments puts a flat floor
  // under the residuals of the moment-weighted coefficients.
  MeterModel gaussian = make_meter(config);
  MeterModel meter = custom_meter(gaussian.grid(), gaussian.amplitudes());
  ProtocolSeries series = expand_moments_series(rp.psi_i, rp.ps.psi_f, rp.a, meter);
  const std::vector<double>& gs = config.g_list;

  std::vector<PostselectionMoments> moms;
  moms.reserve(gs.size());
  for (double g : gs) moms.push_back(postselection_moments(rp.psi_i, rp.ps.psi_f, rp.a, meter, g));

  auto target_block = [&](const SeriesCoefficients& sc, auto exact_of) {
    ordered_json block;
    block["coefficients"] = sc.coeffs;
    ordered_json rows = ordered_json::array();
    std::vector<double> lg, lr;
    for (std::size_t i = 0; i < gs.size(); ++i) {
      double series_value = sc.evaluate(gs[i]);
      double exact = exact_of(moms[i]);
      double residual = series_value - exact;
      ordered_json row;
      row["g"] = gs[i];
      row["series"] = series_value;
      row["exact"] = exact;
      row["residual"] = residual;
      rows.push_back(std::move(row));
      // fit only residuals above the double-rounding floor of the exact
      // moments; a target that vanishes identically yields order null
      if (std::abs(residual) > 1e-15 * std::max(1.0, std::abs(exact))) {
        lg.push_back(std::log(gs[i]));
        lr.push_back(std::log(std::abs(residual)));
      }
    }
    block["rows"] = std::move(rows);
    if (lg.size() >= 2) {
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < lg.size(); ++i) {
        mx += lg[i];
        my += lr[i];
      }
      mx /= static_cast<double>(lg.size());
      my /= static_cast<double>(lg.size());
      double sxx = 0.0, sxy = 0.0;
      for (std::size_t i = 0; i < lg.size(); ++i) {
        sxx += (lg[i] - mx) * (lg[i] - mx);
        sxy += (lg[i] - mx) * (lr[i] - my);
      }
      block["fitted_order"] = sxy / sxx;
    } else {
      block["fitted_order"] = nullptr;
    }
    return block;
  };

  ordered_json targets;
  targets["p_f"] = target_block(series.p_f, [](const PostselectionMoments& m) { return m.p_f; });
  targets["qq"] = target_block(series.qq, [](const PostselectionMoments& m) { return m.qq; });
  targets["qo_real"] =
      target_block(series.qo_real, [](const PostselectionMoments& m) { return m.qo.real(); });
  targets["qo_imag"] =
      target_block(series.qo_imag, [](const PostselectionMoments& m) { return m.qo.imag(); });

  double max_phase = 0.0;
  for (double g : gs)
    max_phase = std::max(max_phase, std::abs(g) * meter.delta() * rp.a.max_abs_eigenvalue());

  ordered_json r;
  r["targets"] = std::move(targets);
  ordered_json validity;
  validity["max_g_delta_amax"] = max_phase;
  validity["warning"] = max_phase >= 0.3;
  r["validity"] = std::move(validity);
  return r;
}

ordered_json montecarlo_results(const CrbReport& crb) {
  ordered_json r;
  r["g_true"] = crb.g_true;
  r["mean"] = crb.mean;
  r["bias"] = crb.bias;
  r["std_dev"] = crb.std_dev;
  r["crb_std"] = crb.crb_std;
  r["ratio"] = crb.ratio;
  r["fisher"] = crb.fisher;
  r["success_fraction"] = crb.success_fraction;
  r["nu"] = crb.nu;
  r["replicas"] = crb.replicas;
  r["degenerate"] = crb.degenerate;
  r["estimates"] = crb.estimates;
  return r;
}

std::string read_config_text(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path);
  if (!in) throw config_error("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing output file '" + path + "'");
}

}  // namespace

std::string mode_name(RunMode mode) {
  switch (mode) {
    case RunMode::report: return "report";
    case RunMode::sweep_fig1: return "sweep-fig1";
    case RunMode::sweep_fig2: return "sweep-fig2";
    case RunMode::series_check: return "series-check";
    case RunMode::montecarlo: return "montecarlo";
  }
  return "report";
}

RunConfig parse_run_config(const std::string& json_text, const std::string& cli_mode) {
  RunConfig config;
  config.mode = mode_from_name(cli_mode);
  const unsigned bit = mode_bit(config.mode);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config parse error: ") + e.what());
  }
  if (!j.is_object()) throw config_error("config root must be a JSON object");

  for (const auto& item : j.items()) {
    const std::string& key = item.key();
    auto it = std::find_if(key_table().begin(), key_table().end(),
                           [&](const auto& row) { return row.first == key; });
    if (it == key_table().end()) throw config_error("unknown config key '" + key + "'");
    if (!(it->second & bit))
      throw config_error("config key '" + key + "' does not apply to mode '" + cli_mode + "'");
  }

  if (j.contains("mode")) {
    std::string declared = require_string(j["mode"], "mode");
    if (declared != cli_mode)
      throw config_error("config mode '" + declared + "' does not match subcommand '" +
                         cli_mode + "'");
  }

  if (j.contains("meter_delta")) {
    config.meter_delta = require_number(j["meter_delta"], "meter_delta");
    if (config.meter_delta <= 0.0) throw config_error("config key 'meter_delta' must be positive");
  }
  if (j.contains("meter_points")) {
    std::int64_t n = require_integer(j["meter_points"], "meter_points");
    if (n < 3 || n % 2 == 0)
      throw config_error("config key 'meter_points' must be an odd integer >= 3");
    config.meter_points = static_cast<int>(n);
  }
  if (j.contains("meter_half_width")) {
    config.meter_half_width = require_number(j["meter_half_width"], "meter_half_width");
    if (config.meter_half_width <= 0.0)
      throw config_error("config key 'meter_half_width' must be positive");
  }
  if (j.contains("out")) config.out = require_string(j["out"], "out");

  const bool needs_theta_i = config.mode == RunMode::report ||
                             config.mode == RunMode::series_check ||
                             config.mode == RunMode::montecarlo;
  if (j.contains("theta_i")) {
    config.theta_i = require_number(j["theta_i"], "theta_i");
    require_angle(config.theta_i, "theta_i");
  } else if (needs_theta_i) {
    throw config_error("config key 'theta_i' is required for mode '" + cli_mode + "'");
  } else if (config.mode == RunMode::sweep_fig2) {
    config.theta_i = std::numbers::pi / 3.0;
  }

  if (j.contains("theta_f")) {
    double tf = require_number(j["theta_f"], "theta_f");
    require_angle(tf, "theta_f");
    config.theta_f = tf;
  }
  if (j.contains("phi")) config.phi = require_number(j["phi"], "phi");

  if (bit & (kInReport | kInSeries | kInMc)) {
    if (j.contains("postselection")) {
      config.postselection = require_string(j["postselection"], "postselection");
      if (config.postselection != "optimal" && config.postselection != "identity" &&
          config.postselection != "pair")
        throw config_error("config key 'postselection' must be one of optimal|identity|pair");
    } else {
      config.postselection = config.theta_f ? "pair" : "optimal";
    }
    if (config.postselection == "pair") {
      if (!config.theta_f || !config.phi)
        throw config_error("postselection 'pair' requires both 'theta_f' and 'phi'");
    } else if (config.theta_f || config.phi) {
      throw config_error("postselection '" + config.postselection +
                         "' does not take 'theta_f' or 'phi'");
    }
  }

  if (j.contains("g")) config.g = require_number(j["g"], "g");
  if (j.contains("g_delta")) config.g_delta = require_number(j["g_delta"], "g_delta");

  if (config.mode == RunMode::report || config.mode == RunMode::montecarlo) {
    if (config.g.has_value() == config.g_delta.has_value())
      throw config_error("exactly one of 'g' and 'g_delta' is required for mode '" + cli_mode +
                         "'");
    if (config.g_delta) config.g = *config.g_delta / config.meter_delta;
    if (config.mode == RunMode::montecarlo && *config.g <= 0.0)
      throw config_error("the resolved coupling 'g' must be positive for montecarlo runs");
  }
  if (config.mode == RunMode::sweep_fig1) {
    if (!config.g_delta) config.g_delta = 0.1;
    if (*config.g_delta <= 0.0) throw config_error("config key 'g_delta' must be positive");
  }

  if (config.mode == RunMode::sweep_fig2) {
    config.g_delta_list = j.contains("g_delta_list")
                              ? require_number_list(j["g_delta_list"], "g_delta_list")
                              : std::vector<double>{1e-1, 1e-2, 1e-3};
  }
  if (config.mode == RunMode::series_check) {
    config.g_list =
        j.contains("g_list") ? require_number_list(j["g_list"], "g_list") : default_g_list();
  }

  if (bit & (kInFig1 | kInFig2)) {
    if (j.contains("points")) {
      std::int64_t n = require_integer(j["points"], "points");
      if (n < 2) throw config_error("config key 'points' must be an integer >= 2");
      config.points = static_cast<int>(n);
    } else {
      config.points = config.mode == RunMode::sweep_fig1 ? 500 : 601;
    }
  }

  if (j.contains("basis")) {
    std::string basis = require_string(j["basis"], "basis");
    basis_from_name(basis);  // validates
    config.basis = basis;
  } else if (config.mode == RunMode::montecarlo) {
    config.basis = "meter";
  }

  if (j.contains("nu")) {
    config.nu = require_unsigned(j["nu"], "nu");
    if (config.nu == 0) throw config_error("config key 'nu' must be >= 1");
  }
  if (j.contains("replicas")) {
    std::int64_t n = require_integer(j["replicas"], "replicas");
    if (n < 1) throw config_error("config key 'replicas' must be >= 1");
    config.replicas = static_cast<int>(n);
  }
  if (j.contains("seed")) config.seed = require_unsigned(j["seed"], "seed");
  if (j.contains("threads")) {
    std::uint64_t n = require_unsigned(j["threads"], "threads");
    if (n == 0) throw config_error("config key 'threads' must be >= 1");
    config.threads = static_cast<unsigned>(n);
  }
  if (j.contains("dataset_out"))
    config.dataset_out = require_string(j["dataset_out"], "dataset_out");

  return config;
}

void apply_overrides(RunConfig& config, const std::optional<std::string>& out,
                     const std::optional<std::uint64_t>& seed,
                     const std::optional<unsigned>& threads) {
  if (out) config.out = *out;
  if (seed) {
    if (config.mode != RunMode::montecarlo)
      throw config_error("--seed only applies to montecarlo runs");
    config.seed = *seed;
  }
  if (threads) {
    if (!(mode_bit(config.mode) & (kInFig1 | kInFig2 | kInMc)))
      throw config_error("--threads does not apply to mode '" + mode_name(config.mode) + "'");
    if (*threads == 0) throw config_error("--threads must be >= 1");
    config.threads = *threads;
  }
}

std::vector<Fig1Row> compute_fig1_rows(const RunConfig& config) {
  const int n = config.points > 0 ? config.points : 500;
  const double g_delta = config.g_delta.value_or(0.1);
  const MeterModel meter = make_meter(config);
  const double g = g_delta / config.meter_delta;
  const HermitianObservable a = pauli_z();
  std::vector<Fig1Row> rows(static_cast<std::size_t>(n));
  parallel_for(rows.size(), config.threads, [&](std::size_t k) {
    const double theta = std::numbers::pi * (static_cast<double>(k) + 0.5) / n;
    SystemState psi_i = bloch_state(QubitAngles(theta, 0.0));
    PostSelection ps = optimal_postselection(psi_i, a);
    FisherReport rep = fps_total(psi_i, ps.psi_f, a, meter, g);
    rows[k] = {theta, rep.fm / rep.qfi, rep.fpf / rep.qfi, rep.fps / rep.qfi};
  });
  return rows;
}

std::vector<Fig2Row> compute_fig2_rows(const RunConfig& config) {
  const int base_n = config.points > 0 ? config.points : 601;
  const std::vector<double> g_deltas =
      config.g_delta_list.empty() ? std::vector<double>{1e-1, 1e-2, 1e-3} : config.g_delta_list;
  const MeterModel meter = make_meter(config);
  const HermitianObservable a = pauli_z();
  const SystemState psi_i = bloch_state(QubitAngles(config.theta_i, 0.0));

  struct Job {
    double theta_f;
    double g_delta;
  };
  std::vector<Job> jobs;
  for (double gd : g_deltas) {
    std::vector<double> grid;
    grid.reserve(static_cast<std::size_t>(base_n) + 1200);
    for (int k = 0; k < base_n; ++k)
      grid.push_back(std::numbers::pi * (k + 0.5) / base_n);
    // Refine around the readout-information dip so its width is resolved at
    // every coupling; the dip narrows with g*delta.
    const double center = std::numbers::pi - config.theta_i;
    const double half = std::min(0.5, std::max(12.0 * gd, 0.01));
    const double step = std::clamp(gd / 20.0, 5e-5, 5e-3);
    const int m = static_cast<int>(std::lround(2.0 * half / step));
    for (int k = 0; k <= m; ++k)
      grid.push_back(std::clamp(center - half + k * step, 0.0, std::numbers::pi));
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end(),
                           [](double x, double y) { return std::abs(x - y) < 1e-12; }),
               grid.end());
    for (double t : grid) jobs.push_back({t, gd});
  }

  std::vector<Fig2Row> rows(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t i) {
    const Job& job = jobs[i];
    SystemState psi_f = bloch_state(QubitAngles(job.theta_f, std::numbers::pi));
    PostSelection ps = pair_postselection(psi_i, psi_f);
    FisherReport rep = fps_total(psi_i, ps.psi_f, a, meter, job.g_delta / config.meter_delta);
    rows[i] = {job.theta_f, job.g_delta, rep.fm / rep.qfi, rep.fps / rep.qfi};
  });
  return rows;
}

RunArtifact execute_run(const RunConfig& config) {
  RunArtifact artifact;
  switch (config.mode) {
    case RunMode::report:
      artifact.text = json_document(config, report_results(config));
      break;
    case RunMode::sweep_fig1: {
      std::vector<std::string> lines;
      for (const Fig1Row& row : compute_fig1_rows(config)) {
        lines.push_back(format_csv_value(row.theta_i) + "," + format_csv_value(row.fm_over_qfi) +
                        "," + format_csv_value(row.fpf_over_qfi) + "," +
                        format_csv_value(row.fps_over_qfi));
      }
      artifact.text =
          csv_document(config, "theta_i,fm_over_qfi,fpf_over_qfi,fps_over_qfi", lines);
      break;
    }
    case RunMode::sweep_fig2: {
      std::vector<std::string> lines;
      for (const Fig2Row& row : compute_fig2_rows(config)) {
        lines.push_back(format_csv_value(row.theta_f) + "," + format_csv_value(row.g_delta) +
                        "," + format_csv_value(row.fm_over_qfi) + "," +
                        format_csv_value(row.fps_over_qfi));
      }
      artifact.text = csv_document(config, "theta_f,g_delta,fm_over_qfi,fps_over_qfi", lines);
      break;
    }
    case RunMode::series_check:
      artifact.text = json_document(config, series_results(config));
      break;
    case RunMode::montecarlo: {
      ResolvedProtocol rp = resolve_protocol(config);
      MeterModel meter = make_meter(config);
      ExperimentConfig ec{rp.psi_i, rp.ps.psi_f,        rp.a,
                          meter,    *config.g,          basis_from_name(*config.basis)};
      CrbReport crb = crb_report(ec, config.nu, config.replicas, config.seed, config.threads);
      artifact.text = json_document(config, montecarlo_results(crb));
      if (config.dataset_out) {
        ExperimentDataset ds = sample_dataset(ec, config.nu, config.seed, config.threads);
        artifact.dataset_text = dataset_to_text(ds);
      }
      break;
    }
  }
  return artifact;
}

int run_main(int argc, char** argv) {
  CLI::App app{"Post-selected weak-coupling metrology: Fisher reports, sweeps, and Monte Carlo"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_value;
  std::uint64_t seed_value = 0;
  unsigned threads_value = 0;

  static const std::pair<const char*, const char*> kSubcommands[] = {
      {"report", "Information budget of one protocol configuration (JSON)"},
      {"sweep-fig1", "Information split vs pre-selection angle, optimal ansatz (CSV)"},
      {"sweep-fig2", "Information split vs post-selection angle at phi = pi (CSV)"},
      {"series-check", "Weak-coupling expansions vs exact readout moments (JSON)"},
      {"montecarlo", "Estimator variance vs the Cramer-Rao limit by simulation (JSON)"},
  };
  for (const auto& [name, description] : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, description);
    sub->add_option("--config", config_path, "JSON config file path, or '-' for standard input")
        ->required();
    sub->add_option("--out", out_value, "Output file path (default: standard output)");
    sub->add_option("--seed", seed_value, "Master RNG seed override (montecarlo only)");
    sub->add_option("--threads", threads_value, "Worker thread count (sweeps and montecarlo)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  CLI::App* sub = app.get_subcommands().front();
  try {
    RunConfig config = parse_run_config(read_config_text(config_path), sub->get_name());
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    if (sub->count("--out") > 0) out = out_value;
    if (sub->count("--seed") > 0) seed = seed_value;
    if (sub->count("--threads") > 0) threads = threads_value;
    apply_overrides(config, out, seed, threads);

    RunArtifact artifact = execute_run(config);
    if (config.out.empty()) {
      std::cout << artifact.text;
    } else {
      write_text_file(config.out, artifact.text);
    }
    if (artifact.dataset_text) write_text_file(*config.dataset_out, *artifact.dataset_text);
    return 0;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const degeneracy_error& e) {
    std::cerr << "degeneracy: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace wva
