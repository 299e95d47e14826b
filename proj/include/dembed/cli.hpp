#pragma once

// Command implementations behind the `dembed` executable. Each command takes
// parsed options plus output streams and returns the process exit code:
//   0 success, 1 lemma violation / slope outside bracket,
//   2 configuration or input error, 3 budget-guard rejection.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dembed/experiment.hpp"
#include "dembed/report.hpp"
#include "dembed/rng.hpp"
#include "dembed/spectral.hpp"

namespace dembed::cli {

inline constexpr const char* kToolVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kFailed = 1, kConfigError = 2, kBudgetError = 3 };

/// Configuration problem tied to a field (and, for parse errors, a position).
class config_error : public std::runtime_error {
 public:
  config_error(std::string field, const std::string& what)
      : std::runtime_error(field.empty() ? what : field + ": " + what), field(std::move(field)) {}
  std::string field;
};

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::single_layer_ml: return "single_layer_ml";
    case Scheme::matched_filter: return "matched_filter";
    case Scheme::superposition_sic: return "superposition_sic";
  }
  return "?";
}

inline const char* to_string(RateMode m) { return m == RateMode::fixed ? "fixed" : "scaling"; }

/// Every field with its resolved value; this is the manifest's config echo.
inline nlohmann::json sweep_config_to_json(const SweepConfig& c) {
  nlohmann::json j = {{"n_data", c.shape.n_data},
                      {"nu", c.shape.nu},
                      {"m_rx", c.shape.m_rx},
                      {"scheme", to_string(c.scheme)},
                      {"rate_mode", to_string(c.rate_mode)},
                      {"size_high", c.size_high},
                      {"size_low", c.size_low},
                      {"r_tilde_high", c.r_tilde_high},
                      {"r_tilde_low", c.r_tilde_low},
                      {"beta", c.resolved_beta()},
                      {"low_muted", c.low_muted},
                      {"snr_grid_db", c.snr_grid_db},
                      {"max_trials", c.max_trials},
                      {"target_errors", c.target_errors},
                      {"master_seed", c.master_seed},
                      {"search_budget", c.search_budget}};
  const auto w = c.effective_fit_window();
  j["fit_window_db"] = {w.first, w.second};
  return j;
}

namespace detail {

template <class T>
T field_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw config_error(key, std::string("wrong type: ") + e.what());
  }
}

}  // namespace detail

inline SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("", "configuration must be a JSON object");
  static const std::vector<std::string> known = {
      "n_data",    "nu",         "m_rx",          "scheme",      "rate_mode",   "size_high",
      "size_low",  "r_tilde_high", "r_tilde_low", "beta",        "low_muted",   "snr_grid_db",
      "max_trials", "target_errors", "master_seed", "search_budget", "fit_window_db"};
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) throw config_error(key, "unknown field");

  SweepConfig c;
  using detail::field_as;
  if (j.contains("n_data")) c.shape.n_data = field_as<std::size_t>(j, "n_data");
  if (j.contains("nu")) c.shape.nu = field_as<std::size_t>(j, "nu");
  if (j.contains("m_rx")) c.shape.m_rx = field_as<std::size_t>(j, "m_rx");
  if (j.contains("scheme")) {
    const auto s = field_as<std::string>(j, "scheme");
    if (s == "single_layer_ml") c.scheme = Scheme::single_layer_ml;
    else if (s == "matched_filter") c.scheme = Scheme::matched_filter;
    else if (s == "superposition_sic") c.scheme = Scheme::superposition_sic;
    else throw config_error("scheme", "expected single_layer_ml | matched_filter | superposition_sic, got '" + s + "'");
  }
  if (j.contains("rate_mode")) {
    const auto s = field_as<std::string>(j, "rate_mode");
    if (s == "fixed") c.rate_mode = RateMode::fixed;
    else if (s == "scaling") c.rate_mode = RateMode::scaling;
    else throw config_error("rate_mode", "expected fixed | scaling, got '" + s + "'");
  }
  if (j.contains("size_high")) c.size_high = field_as<std::size_t>(j, "size_high");
  if (j.contains("size_low")) c.size_low = field_as<std::size_t>(j, "size_low");
  if (j.contains("r_tilde_high")) c.r_tilde_high = field_as<double>(j, "r_tilde_high");
  if (j.contains("r_tilde_low")) c.r_tilde_low = field_as<double>(j, "r_tilde_low");
  if (j.contains("beta")) c.beta = field_as<double>(j, "beta");
  if (j.contains("low_muted")) c.low_muted = field_as<bool>(j, "low_muted");
  if (j.contains("snr_grid_db")) c.snr_grid_db = field_as<std::vector<double>>(j, "snr_grid_db");
  if (j.contains("max_trials")) c.max_trials = field_as<std::uint64_t>(j, "max_trials");
  if (j.contains("target_errors")) c.target_errors = field_as<std::uint64_t>(j, "target_errors");
  if (j.contains("master_seed")) c.master_seed = field_as<std::uint64_t>(j, "master_seed");
  if (j.contains("search_budget")) c.search_budget = field_as<std::uint64_t>(j, "search_budget");
  if (j.contains("fit_window_db")) {
    const auto w = field_as<std::vector<double>>(j, "fit_window_db");
    if (w.size() != 2 || !(w[0] <= w[1])) throw config_error("fit_window_db", "expected [lo, hi] with lo <= hi");
    c.fit_window_db = std::make_pair(w[0], w[1]);
  }

  try {
    c.validate();
  } catch (const budget_exceeded&) {
    throw;
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    const auto colon = msg.find(':');
    throw config_error(colon == std::string::npos ? "" : msg.substr(0, colon),
                       colon == std::string::npos ? msg : msg.substr(colon + 2));
  }
  return c;
}

/// Applies KEY=VALUE; VALUE is parsed as JSON and falls back to a plain string.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw config_error("--set", "expected KEY=VALUE, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  nlohmann::json v = nlohmann::json::parse(value, nullptr, false);
  j[key] = v.is_discarded() ? nlohmann::json(value) : v;
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Closed-form bracket matching a sweep's layer, at the rates the sweep targets.
inline std::pair<BoundsReport<double>, BoundsReport<double>> bounds_for(const SweepConfig& c) {
  const double r_h = effective_rate(c.target_r_tilde_high(), c.shape);
  const double r_l = c.layered() ? effective_rate(c.target_r_tilde_low(), c.shape) : 0.0;
  return theoretical_bounds<double>(r_h, r_l, c.shape);
}

struct SimulateOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  unsigned workers = 1;
};

inline int cmd_simulate(const SimulateOptions& opt, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  const std::string started = utc_timestamp();
  SweepConfig cfg;
  try {
    std::ifstream in(opt.config_path);
    if (!in) throw config_error("--config", "cannot open '" + opt.config_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw config_error("", opt.config_path + ": " + e.what());
    }
    for (const auto& s : opt.sets) apply_override(j, s);
    if (opt.seed) j["master_seed"] = *opt.seed;
    cfg = sweep_config_from_json(j);
  } catch (const config_error& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const budget_exceeded& e) {
    err << "budget guard: " << e.what() << '\n';
    return kBudgetError;
  }

  ErrorCurve curve;
  try {
    curve = run_sweep(cfg, opt.workers);
  } catch (const budget_exceeded& e) {
    err << "budget guard: " << e.what() << '\n';
    return kBudgetError;
  }

  const fs::path dir(opt.out_dir);
  fs::create_directories(dir);
  const fs::path csv_path = dir / "curve.csv";
  const fs::path report_path = dir / "report.json";
  const fs::path manifest_path = dir / "manifest.json";
  {
    std::ofstream f(csv_path);
    write_curve_csv(f, curve);
  }

  nlohmann::json report = {{"config", sweep_config_to_json(cfg)}, {"curve", to_json(curve)}};
  const auto window = cfg.effective_fit_window();
  const auto [bh, bl] = bounds_for(cfg);
  report["bounds"] = {{"high", to_json(bh)}, {"low", to_json(bl)}};
  for (const Layer layer : {Layer::high, Layer::low}) {
    if (layer == Layer::low && !curve.has_low_layer) continue;
    const char* name = layer == Layer::high ? "high" : "low";
    try {
      report["diversity"][name] = to_json(estimate_diversity(curve, window, layer));
    } catch (const insufficient_data& e) {
      report["diversity"][name] = {{"error", e.what()}};
    }
  }
  {
    std::ofstream f(report_path);
    f << report.dump(2) << '\n';
  }

  const nlohmann::json manifest = {{"tool_version", kToolVersion},
                                   {"config_echo", sweep_config_to_json(cfg)},
                                   {"master_seed", cfg.master_seed},
                                   {"workers", opt.workers},
                                   {"started", started},
                                   {"finished", utc_timestamp()},
                                   {"outputs",
                                    {{"curve_csv", csv_path.string()},
                                     {"report_json", report_path.string()},
                                     {"manifest", manifest_path.string()}}}};
  {
    std::ofstream f(manifest_path);
    f << manifest.dump(2) << '\n';
  }

  out << "wrote " << csv_path.string() << ", " << report_path.string() << ", " << manifest_path.string() << '\n';
  for (const auto& p : curve.points)
    out << std::setw(8) << p.snr_db << " dB  trials " << std::setw(10) << p.trials << "  p_high "
        << std::scientific << std::setprecision(3) << p.p_high() << "  p_low " << p.p_low() << std::defaultfloat
        << '\n';
  return kOk;
}

struct VerifyLemmaOptions {
  std::vector<std::size_t> nus = {1, 2, 3};
  std::size_t n_min = 2;
  std::size_t n_max = 13;
  std::vector<std::size_t> m_rx = {1};
  std::uint64_t draws = 100000;
  std::uint64_t seed = 1;
  std::optional<std::string> csv_path;  // violating rows only
};

inline int cmd_verify_lemma(const VerifyLemmaOptions& opt, std::ostream& out, std::ostream& err) {
  if (opt.n_min < 1 || opt.n_min > opt.n_max) {
    err << "config error: need 1 <= n_min <= n_max\n";
    return kConfigError;
  }
  std::vector<LemmaCsvRow> failures;
  std::uint64_t total_violations = 0;
  out << std::left << std::setw(6) << "m_rx" << std::setw(5) << "nu" << std::setw(5) << "N" << std::setw(10)
      << "draws" << std::setw(12) << "C_max" << "violations\n";
  std::uint64_t shape_index = 0;
  for (std::size_t mr : opt.m_rx)
    for (std::size_t nu : opt.nus)
      for (std::size_t n = opt.n_min; n <= opt.n_max; ++n, ++shape_index) {
        const BlockShape shape{n, nu, mr};
        double c_max = 0.0;
        try {
          c_max = structural_bound_constant(shape);
        } catch (const budget_exceeded& e) {
          err << "budget guard: " << e.what() << '\n';
          return kBudgetError;
        }
        std::uint64_t violations = 0;
        for (std::uint64_t t = 0; t < opt.draws; ++t) {
          auto rng = trial_stream(opt.seed, shape_index, t, Stream::channel);
          const LemmaReport rep = check_structural_lemma(sample_channel(rng, shape), shape);
          for (const auto& a : rep.antennas)
            if (!a.pass) {
              ++violations;
              failures.push_back({t, a.antenna, a.count_below, a.bound, false});
            }
        }
        total_violations += violations;
        out << std::setw(6) << mr << std::setw(5) << nu << std::setw(5) << n << std::setw(10) << opt.draws
            << std::setw(12) << std::setprecision(6) << c_max << violations << '\n';
      }
  if (opt.csv_path) {
    std::ofstream f(*opt.csv_path);
    write_lemma_csv(f, failures);
  }
  out << (total_violations == 0 ? "all shapes pass\n" : "VIOLATIONS FOUND\n");
  return total_violations == 0 ? kOk : kFailed;
}

struct BoundsOptions {
  double r_h = 0.0;
  double r_l = 0.0;
  std::size_t n_data = 1;
  std::size_t nu = 0;
  std::size_t m_rx = 1;
  std::optional<std::string> csv_path;
};

inline int cmd_bounds(const BoundsOptions& opt, std::ostream& out, std::ostream& err) {
  const BlockShape shape{opt.n_data, opt.nu, opt.m_rx};
  std::pair<BoundsReport<double>, BoundsReport<double>> b;
  try {
    shape.validate();
    b = theoretical_bounds<double>(opt.r_h, opt.r_l, shape);
  } catch (const std::exception& e) {
    const double cap = static_cast<double>(shape.n_data) / static_cast<double>(shape.block_len());
    err << "invalid rates: r_H + r_L = " << opt.r_h + opt.r_l << " must not exceed N/(N+nu) = " << cap
        << " (" << e.what() << ")\n";
    return kConfigError;
  }
  out << std::fixed << std::setprecision(3);
  out << "high: [" << b.first.lower << ", " << b.first.upper << "]\n";
  out << "low: [" << b.second.lower << ", " << b.second.upper << "]\n";
  out << std::defaultfloat;
  if (opt.csv_path) {
    std::ofstream f(*opt.csv_path);
    f << "layer,rate,lower,upper\n" << std::setprecision(17);
    f << "high," << b.first.rate << ',' << b.first.lower << ',' << b.first.upper << '\n';
    f << "low," << b.second.rate << ',' << b.second.lower << ',' << b.second.upper << '\n';
  }
  return kOk;
}

struct SlopeOptions {
  std::string csv_path;
  std::optional<std::pair<double, double>> window;
  Layer layer = Layer::high;
  double tolerance = 0.4;
};

inline int cmd_slope(const SlopeOptions& opt, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  ErrorCurve curve;
  try {
    std::ifstream in(opt.csv_path);
    if (!in) {
      err << "cannot open '" << opt.csv_path << "'\n";
      return kConfigError;
    }
    curve = read_curve_csv(in);
  } catch (const schema_error& e) {
    err << "schema error: " << e.what() << '\n';
    return kConfigError;
  }
  if (curve.points.empty()) {
    err << "insufficient data: curve has no rows\n";
    return kConfigError;
  }

  std::optional<SweepConfig> cfg;
  const fs::path manifest = fs::path(opt.csv_path).parent_path() / "manifest.json";
  if (fs::exists(manifest)) {
    try {
      std::ifstream f(manifest);
      cfg = sweep_config_from_json(nlohmann::json::parse(f).at("config_echo"));
    } catch (const std::exception& e) {
      err << "warning: ignoring unreadable manifest (" << e.what() << ")\n";
    }
  }

  std::pair<double, double> window;
  if (opt.window) window = *opt.window;
  else if (cfg) window = cfg->effective_fit_window();
  else window = {curve.points[curve.points.size() / 2].snr_db, curve.points.back().snr_db};

  DiversityEstimate d;
  try {
    d = estimate_diversity(curve, window, opt.layer);
  } catch (const insufficient_data& e) {
    err << "insufficient data: " << e.what() << '\n';
    return kConfigError;
  }
  out << std::fixed << std::setprecision(3) << "slope: " << d.slope << " stderr: " << d.std_error << " window: ["
      << window.first << ", " << window.second << "] dB points: " << d.points_used << '\n';
  if (!cfg) return kOk;

  const auto [bh, bl] = bounds_for(*cfg);
  const auto& b = opt.layer == Layer::high ? bh : bl;
  const bool pass = d.slope >= b.lower - opt.tolerance && d.slope <= b.upper + opt.tolerance;
  out << "bracket: [" << b.lower << ", " << b.upper << "] tolerance: " << opt.tolerance << '\n';
  out << (pass ? "PASS" : "FAIL") << '\n' << std::defaultfloat;
  return pass ? kOk : kFailed;
}

}  // namespace dembed::cli
