#pragma once

// Monte Carlo sweeps over SNR, outage-set bookkeeping, diversity-slope fits
// and the closed-form tradeoff brackets they are compared against.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <type_traits>
#include <utility>
#include <vector>

#include "dembed/channel.hpp"
#include "dembed/codec.hpp"
#include "dembed/detection.hpp"
#include "dembed/rng.hpp"
#include "dembed/types.hpp"

namespace dembed {

enum class Scheme { single_layer_ml, matched_filter, superposition_sic };
enum class RateMode { fixed, scaling };
enum class Layer { high, low };

/// Raised by estimate_diversity when the window holds too little data.
class insufficient_data : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct SweepConfig {
  BlockShape shape;
  Scheme scheme = Scheme::single_layer_ml;
  RateMode rate_mode = RateMode::fixed;
  std::size_t size_high = 4;  // fixed mode
  std::size_t size_low = 4;
  double r_tilde_high = 0.0;  // scaling mode
  double r_tilde_low = 0.0;
  std::optional<double> beta;  // unset: r_tilde_high + 0.1
  bool low_muted = false;
  std::vector<double> snr_grid_db;
  std::uint64_t max_trials = 1'000'000;
  std::uint64_t target_errors = 200;
  std::uint64_t master_seed = 1;
  std::uint64_t search_budget = kDefaultSearchBudget;
  std::optional<std::pair<double, double>> fit_window_db;

  bool layered() const noexcept { return scheme == Scheme::superposition_sic && !low_muted; }

  /// Raw rate exponents actually requested; zero in fixed mode.
  double target_r_tilde_high() const noexcept { return rate_mode == RateMode::scaling ? r_tilde_high : 0.0; }
  double target_r_tilde_low() const noexcept { return rate_mode == RateMode::scaling ? r_tilde_low : 0.0; }

  double resolved_beta() const noexcept { return beta.value_or(target_r_tilde_high() + 0.1); }

  LayerConfig layer_config(double snr) const {
    LayerConfig lc;
    lc.r_tilde_high = target_r_tilde_high();
    lc.r_tilde_low = target_r_tilde_low();
    lc.beta = scheme == Scheme::superposition_sic ? resolved_beta() : 1.0;
    lc.snr = snr;
    lc.fixed_size_high = size_high;
    lc.fixed_size_low = size_low;
    lc.low_muted = !layered();
    return lc;
  }

  /// Window used by estimate_diversity when none is configured: top half of the grid.
  std::pair<double, double> effective_fit_window() const {
    if (fit_window_db) return *fit_window_db;
    if (snr_grid_db.empty()) throw std::invalid_argument("SweepConfig: empty SNR grid");
    return {snr_grid_db[snr_grid_db.size() / 2], snr_grid_db.back()};
  }

  void validate() const {
    shape.validate();
    if (snr_grid_db.empty()) throw std::invalid_argument("snr_grid_db: empty SNR grid");
    for (std::size_t i = 1; i < snr_grid_db.size(); ++i)
      if (!(snr_grid_db[i] > snr_grid_db[i - 1]))
        throw std::invalid_argument("snr_grid_db: grid must be strictly ascending");
    if (db_to_linear(snr_grid_db.front()) <= 1.0 && rate_mode == RateMode::scaling)
      throw std::invalid_argument("snr_grid_db: scaling-rate mode needs SNR above 0 dB");
    if (max_trials < 1) throw std::invalid_argument("max_trials: must be >= 1");
    if (target_errors < 1) throw std::invalid_argument("target_errors: must be >= 1");
    if (scheme == Scheme::matched_filter && (r_tilde_low != 0.0 && rate_mode == RateMode::scaling))
      throw std::invalid_argument("scheme: matched_filter is single-layer; r_tilde_low must be 0");
    if (target_r_tilde_high() < 0.0 || target_r_tilde_low() < 0.0)
      throw std::invalid_argument("r_tilde: rates must be non-negative");
    const double total = target_r_tilde_high() + (layered() ? target_r_tilde_low() : 0.0);
    if (total > 1.0 + 1e-12) {
      const double n = static_cast<double>(shape.n_data);
      const double len = static_cast<double>(shape.block_len());
      throw std::invalid_argument("rate constraint violated: r_H + r_L = " + std::to_string(total * n / len) +
                                  " exceeds N/(N+nu) = " + std::to_string(n / len));
    }
    if (scheme == Scheme::superposition_sic && !(resolved_beta() > target_r_tilde_high()))
      throw std::invalid_argument("beta: must exceed r_tilde_high (minimum-distance preservation)");
    if (scheme == Scheme::superposition_sic && !(resolved_beta() <= 1.0)) throw std::invalid_argument("beta: must be <= 1");
    if (rate_mode == RateMode::fixed) {
      make_qam(size_high, 1.0);  // throws on a bad size
      if (layered()) make_qam(size_low, 1.0);
    }
    if (scheme != Scheme::matched_filter) {
      // the largest constellations occur at the top of the grid
      const LayerConstellations top = make_layers(layer_config(db_to_linear(snr_grid_db.back())));
      checked_search_size(top.high.size(), shape.n_data, search_budget);
      if (top.low) checked_search_size(top.low->size(), shape.n_data, search_budget);
    }
  }
};

/// Wilson score interval at 95% (z = 1.96).
inline std::pair<double, double> wilson_interval(std::uint64_t errors, std::uint64_t trials, double z = 1.96) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(errors) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

struct CurvePoint {
  double snr_db = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t errors_high = 0;
  std::uint64_t errors_low = 0;
  std::uint64_t outage = 0;      // channels in the high-layer outage set (A, A_H or M_H)
  std::uint64_t outage_low = 0;  // channels in the low-layer outage set (A_L / M_L)
  std::uint64_t errors_high_in_outage = 0;
  std::uint64_t errors_high_no_outage = 0;
  std::uint64_t errors_low_in_outage = 0;
  std::uint64_t errors_low_no_outage = 0;
  std::uint64_t ties = 0;
  std::size_t size_high = 0;
  std::size_t size_low = 0;
  double realized_r_tilde_high = 0.0;
  double realized_r_tilde_low = 0.0;

  double p_high() const noexcept { return trials ? static_cast<double>(errors_high) / trials : 0.0; }
  double p_low() const noexcept { return trials ? static_cast<double>(errors_low) / trials : 0.0; }
  std::pair<double, double> ci_high() const { return wilson_interval(errors_high, trials); }
  std::pair<double, double> ci_low() const { return wilson_interval(errors_low, trials); }

  std::uint64_t errors(Layer l) const noexcept { return l == Layer::high ? errors_high : errors_low; }
  double p_hat(Layer l) const noexcept { return l == Layer::high ? p_high() : p_low(); }

  friend bool operator==(const CurvePoint&, const CurvePoint&) = default;
};

struct ErrorCurve {
  std::vector<CurvePoint> points;
  bool has_low_layer = false;

  friend bool operator==(const ErrorCurve&, const ErrorCurve&) = default;
};

/// True iff every tap of every antenna has |h|^2 <= snr^-exponent.
inline bool classify_outage(const ChannelRealization& ch, double snr, double exponent) {
  const double level = std::pow(snr, -exponent);
  for (const cplx& h : ch.taps.data())
    if (std::norm(h) > level) return false;
  return true;
}

namespace detail {

inline constexpr std::uint64_t kChunkTrials = 256;

struct PointContext {
  const SweepConfig* cfg = nullptr;
  std::size_t point = 0;
  double snr = 1.0;
  LayerConstellations layers;
  double outage_exp_high = 1.0;
  double outage_exp_low = 1.0;
};

struct Tally {
  std::uint64_t trials = 0, errors_high = 0, errors_low = 0, outage = 0, outage_low = 0;
  std::uint64_t eh_in = 0, eh_out = 0, el_in = 0, el_out = 0, ties = 0;

  void add(const Tally& o) {
    trials += o.trials;
    errors_high += o.errors_high;
    errors_low += o.errors_low;
    outage += o.outage;
    outage_low += o.outage_low;
    eh_in += o.eh_in;
    eh_out += o.eh_out;
    el_in += o.el_in;
    el_out += o.el_out;
    ties += o.ties;
  }
};

template <class Rng>
void draw_indices(Rng& rng, std::size_t m, std::vector<std::size_t>& out) {
  std::uniform_int_distribution<std::size_t> pick(0, m - 1);
  for (auto& v : out) v = pick(rng);
}

/// One trial; returns (high error, low error, ties) and fills outage flags.
inline void run_trial(const PointContext& ctx, const FrequencyDomain& fd, std::uint64_t trial, Tally& t) {
  const SweepConfig& cfg = *ctx.cfg;
  const BlockShape& shape = cfg.shape;
  auto ch_rng = trial_stream(cfg.master_seed, ctx.point, trial, Stream::channel);
  auto hi_rng = trial_stream(cfg.master_seed, ctx.point, trial, Stream::data_high);
  auto noise_rng = trial_stream(cfg.master_seed, ctx.point, trial, Stream::noise);

  const ChannelRealization ch = sample_channel(ch_rng, shape);
  std::vector<std::size_t> high(shape.n_data);
  draw_indices(hi_rng, ctx.layers.high.size(), high);

  bool high_err = false;
  bool low_err = false;

  if (cfg.scheme == Scheme::matched_filter) {
    ComplexGaussian cn(1.0);
    CMatrix burst(shape.m_rx, shape.n_taps());
    for (std::size_t n = 0; n < shape.n_data && !high_err; ++n) {
      const cplx s = ctx.layers.high.points[high[n]];
      for (std::size_t p = 0; p < shape.m_rx; ++p)
        for (std::size_t m = 0; m < shape.n_taps(); ++m) burst(p, m) = ch.taps(p, m) * s + cn(noise_rng);
      if (matched_filter_detect(burst, ch, ctx.layers.high) != high[n]) high_err = true;
    }
  } else {
    std::vector<std::size_t> low;
    if (ctx.layers.low) {
      auto lo_rng = trial_stream(cfg.master_seed, ctx.point, trial, Stream::data_low);
      low.resize(shape.n_data);
      draw_indices(lo_rng, ctx.layers.low->size(), low);
    }
    const LayeredCodeword cw = superpose(ctx.layers, high, low, shape);
    const ReceivedBlock y = apply_channel(cw.time_block, ch, shape, 1.0, noise_rng);
    const DetectionResult det = sic_decode(fd.transform(y), fd.effective_matrix(ch), ctx.layers, cfg.search_budget);
    high_err = det.high_indices != high;
    if (ctx.layers.low) low_err = *det.low_indices != low;
    t.ties += det.ties_broken;
  }

  const bool out_h = classify_outage(ch, ctx.snr, ctx.outage_exp_high);
  ++t.trials;
  t.outage += out_h;
  t.errors_high += high_err;
  (out_h ? t.eh_in : t.eh_out) += high_err;
  if (ctx.layers.low) {
    const bool out_l = classify_outage(ch, ctx.snr, ctx.outage_exp_low);
    t.outage_low += out_l;
    t.errors_low += low_err;
    (out_l ? t.el_in : t.el_out) += low_err;
  }
}

inline double realized_exponent(std::size_t size, double snr) {
  return size > 0 ? std::log2(static_cast<double>(size)) / std::log2(snr) : 0.0;
}

}  // namespace detail

/// Runs every SNR point of the sweep.
///
/// Trials are grouped into fixed chunks of 256; chunk results are merged in
/// index order and a point stops after the first chunk at which the target
/// error count is reached (both layers when layered) or max_trials is hit.
/// The curve is therefore a function of the configuration alone; `workers`
/// changes only the wall-clock time.
inline ErrorCurve run_sweep(const SweepConfig& cfg, unsigned workers = 1) {
  cfg.validate();
  workers = std::max(1u, workers);
  const FrequencyDomain fd(cfg.shape);
  ErrorCurve curve;
  curve.has_low_layer = cfg.layered();

  for (std::size_t pi = 0; pi < cfg.snr_grid_db.size(); ++pi) {
    detail::PointContext ctx;
    ctx.cfg = &cfg;
    ctx.point = pi;
    ctx.snr = db_to_linear(cfg.snr_grid_db[pi]);
    ctx.layers = make_layers(cfg.layer_config(ctx.snr));
    ctx.outage_exp_high = 1.0 - cfg.target_r_tilde_high();
    ctx.outage_exp_low = 1.0 - cfg.target_r_tilde_low() - cfg.resolved_beta();

    const std::uint64_t total_chunks = (cfg.max_trials + detail::kChunkTrials - 1) / detail::kChunkTrials;
    const std::uint64_t wave = std::max<std::uint64_t>(8, 4ull * workers);
    detail::Tally acc;
    bool done = false;
    for (std::uint64_t first = 0; first < total_chunks && !done; first += wave) {
      const std::uint64_t count = std::min(wave, total_chunks - first);
      std::vector<detail::Tally> chunks(count);
      auto work_chunk = [&](std::uint64_t c) {
        const std::uint64_t begin = (first + c) * detail::kChunkTrials;
        const std::uint64_t end = std::min(cfg.max_trials, begin + detail::kChunkTrials);
        for (std::uint64_t t = begin; t < end; ++t) detail::run_trial(ctx, fd, t, chunks[c]);
      };
      if (workers == 1) {
        for (std::uint64_t c = 0; c < count; ++c) work_chunk(c);
      } else {
        std::atomic<std::uint64_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < std::min<std::uint64_t>(workers, count); ++w)
          pool.emplace_back([&] {
            for (std::uint64_t c = next++; c < count; c = next++) work_chunk(c);
          });
      }
      for (const auto& ch : chunks) {
        acc.add(ch);
        const bool high_done = acc.errors_high >= cfg.target_errors;
        const bool low_done = !ctx.layers.low || acc.errors_low >= cfg.target_errors;
        if (high_done && low_done) {
          done = true;
          break;
        }
      }
    }

    CurvePoint pt;
    pt.snr_db = cfg.snr_grid_db[pi];
    pt.trials = acc.trials;
    pt.errors_high = acc.errors_high;
    pt.errors_low = acc.errors_low;
    pt.outage = acc.outage;
    pt.outage_low = acc.outage_low;
    pt.errors_high_in_outage = acc.eh_in;
    pt.errors_high_no_outage = acc.eh_out;
    pt.errors_low_in_outage = acc.el_in;
    pt.errors_low_no_outage = acc.el_out;
    pt.ties = acc.ties;
    pt.size_high = ctx.layers.high.size();
    pt.size_low = ctx.layers.low ? ctx.layers.low->size() : 0;
    pt.realized_r_tilde_high = detail::realized_exponent(pt.size_high, ctx.snr);
    pt.realized_r_tilde_low = detail::realized_exponent(pt.size_low, ctx.snr);
    curve.points.push_back(pt);
  }
  return curve;
}

struct DiversityEstimate {
  double slope = 0.0;
  double std_error = 0.0;
  std::pair<double, double> fit_window_db{};
  std::size_t points_used = 0;
};

/// Weighted least squares of log10(p_hat) on SNR_dB/10 over the window; the
/// slope is returned with its sign flipped. Weights are the inverse
/// binomial-count variance of log p_hat, errors / (1 - p_hat).
inline DiversityEstimate estimate_diversity(const ErrorCurve& curve, std::pair<double, double> window_db,
                                            Layer layer = Layer::high, std::uint64_t min_errors = 10) {
  std::vector<double> xs, ys, ws;
  for (const CurvePoint& p : curve.points) {
    if (p.snr_db < window_db.first || p.snr_db > window_db.second) continue;
    const std::uint64_t e = p.errors(layer);
    if (e < min_errors || p.trials == 0) continue;
    const double ph = p.p_hat(layer);
    xs.push_back(p.snr_db / 10.0);
    ys.push_back(std::log10(ph));
    ws.push_back(static_cast<double>(e) / (ph < 1.0 ? 1.0 - ph : 1.0));
  }
  if (xs.size() < 2)
    throw insufficient_data("estimate_diversity: need at least 2 points with >= " + std::to_string(min_errors) +
                            " errors inside [" + std::to_string(window_db.first) + ", " +
                            std::to_string(window_db.second) + "] dB; widen the window or raise trials");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sw += ws[i];
    sx += ws[i] * xs[i];
    sy += ws[i] * ys[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
    sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
  }
  const double b = sxy / sxx;
  const double a = my - b * mx;
  double se = 0.0;
  if (xs.size() > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) rss += ws[i] * std::pow(ys[i] - a - b * xs[i], 2);
    se = std::sqrt(rss / static_cast<double>(xs.size() - 2) / sxx);
  }
  return {-b, se, window_db, xs.size()};
}

template <class T>
struct BoundsReport {
  T lower{};
  T upper{};
  T rate{};  // r_H for the high layer, r_H + r_L for the low layer
  BlockShape shape;
};

/// Diversity brackets for both layers at effective rates (r_h, r_l):
///   high: [M_r(nu+1)(1 - (N+nu)/N r_H), M_r(nu+1)(1 - r_H)]
///   low:  same at r_H + r_L.
/// With r_l = 0 and m_rx = 1 the high bracket is the single-layer ISI tradeoff.
/// T may be double or an exact rational type.
template <class T>
std::pair<BoundsReport<T>, BoundsReport<T>> theoretical_bounds(T r_h, T r_l, const BlockShape& shape) {
  const T n = T(static_cast<long>(shape.n_data));
  const T len = T(static_cast<long>(shape.block_len()));
  const T zero = T(0);
  if (r_h < zero || r_l < zero) throw std::domain_error("theoretical_bounds: rates must be non-negative");
  // r_h + r_l <= N/(N+nu), compared without division
  const T lhs = (r_h + r_l) * len;
  bool over = lhs > n;
  if constexpr (std::is_floating_point_v<T>) over = lhs > n + T(1e-12) * n;
  if (over) throw std::domain_error("theoretical_bounds: r_H + r_L exceeds N/(N+nu)");

  const T scale = T(static_cast<long>(shape.m_rx * shape.n_taps()));
  auto bracket = [&](T r) {
    BoundsReport<T> b;
    b.rate = r;
    b.lower = scale * (T(1) - len / n * r);
    b.upper = scale * (T(1) - r);
    b.shape = shape;
    return b;
  };
  return {bracket(r_h), bracket(r_h + r_l)};
}

struct RefinementSummary {
  DiversityEstimate high;
  DiversityEstimate low;
  DiversityEstimate baseline;
  BoundsReport<double> high_bounds;
  BoundsReport<double> low_bounds;
  double tolerance = 0.4;
  bool high_matches_baseline = false;
};

/// Compares the layered run against a single-layer baseline at the high-layer
/// rate. The embedding is free when d_H matches the baseline within `tolerance`.
inline RefinementSummary refinement_report(const ErrorCurve& layered, const ErrorCurve& baseline,
                                           std::pair<double, double> window_db, double r_h, double r_l,
                                           const BlockShape& shape, double tolerance = 0.4) {
  if (layered.points.size() != baseline.points.size())
    throw std::invalid_argument("refinement_report: SNR grid mismatch");
  for (std::size_t i = 0; i < layered.points.size(); ++i)
    if (layered.points[i].snr_db != baseline.points[i].snr_db)
      throw std::invalid_argument("refinement_report: SNR grid mismatch");
  if (!layered.has_low_layer) throw std::invalid_argument("refinement_report: layered curve has no low layer");
  RefinementSummary s;
  s.high = estimate_diversity(layered, window_db, Layer::high);
  s.low = estimate_diversity(layered, window_db, Layer::low);
  s.baseline = estimate_diversity(baseline, window_db, Layer::high);
  std::tie(s.high_bounds, s.low_bounds) = theoretical_bounds<double>(r_h, r_l, shape);
  s.tolerance = tolerance;
  s.high_matches_baseline = std::abs(s.high.slope - s.baseline.slope) <= tolerance;
  return s;
}

}  // namespace dembed
