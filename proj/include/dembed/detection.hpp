#pragma once

// Receivers: exhaustive ML block detection (frequency- and time-domain forms),
// the single-symbol matched-filter receiver, and two-stage successive
// cancellation for superposed layers.
//
// All block detectors minimise ||target - G x||^2 over x in X^N by full
// enumeration in lexicographic index order. Exact ties keep the earlier
// (lexicographically smaller) candidate and are counted.

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dembed/channel.hpp"
#include "dembed/codec.hpp"
#include "dembed/spectral.hpp"
#include "dembed/types.hpp"

namespace dembed {

inline constexpr std::uint64_t kDefaultSearchBudget = 1'000'000;

struct DetectionResult {
  std::vector<std::size_t> high_indices;
  std::optional<std::vector<std::size_t>> low_indices;
  double metric = 0.0;
  std::size_t ties_broken = 0;
};

struct SearchResult {
  std::vector<std::size_t> indices;
  double metric = std::numeric_limits<double>::infinity();
  std::size_t ties = 0;
};

/// M^N, or throws budget_exceeded when it exceeds `budget`.
inline std::uint64_t checked_search_size(std::size_t m, std::size_t n, std::uint64_t budget) {
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < n; ++i) {
    if (total > budget / m)
      throw budget_exceeded("exhaustive search over " + std::to_string(m) + "^" + std::to_string(n) +
                            " candidates exceeds budget " + std::to_string(budget));
    total *= m;
  }
  if (total > budget) throw budget_exceeded("exhaustive search exceeds budget " + std::to_string(budget));
  return total;
}

/// argmin_x ||target - g x||^2 over x in c^N, N = g.cols().
///
/// Depth-first odometer: level d keeps target - sum_{i<d} g_i x_i, so moving
/// to the next candidate only recomputes the levels below the digit that changed.
inline SearchResult exhaustive_search(std::span<const cplx> target, const CMatrix& g, const Constellation& c,
                                      std::uint64_t budget = kDefaultSearchBudget) {
  const std::size_t rows = g.rows();
  const std::size_t n = g.cols();
  const std::size_t m = c.size();
  if (target.size() != rows) throw std::invalid_argument("exhaustive_search: target length mismatch");
  checked_search_size(m, n, budget);

  // table[(col * m + s) * rows + r] = g(r, col) * point_s
  std::vector<cplx> table(n * m * rows);
  for (std::size_t col = 0; col < n; ++col)
    for (std::size_t s = 0; s < m; ++s)
      for (std::size_t r = 0; r < rows; ++r) table[(col * m + s) * rows + r] = g(r, col) * c.points[s];

  std::vector<cplx> level((n + 1) * rows);
  std::copy(target.begin(), target.end(), level.begin());
  std::vector<std::size_t> idx(n, 0);

  auto refresh_from = [&](std::size_t d) {
    for (std::size_t e = d; e + 1 < n; ++e) {
      const cplx* src = &level[e * rows];
      const cplx* col = &table[(e * m + idx[e]) * rows];
      cplx* dst = &level[(e + 1) * rows];
      for (std::size_t r = 0; r < rows; ++r) dst[r] = src[r] - col[r];
    }
  };

  SearchResult best;
  best.indices.assign(n, 0);
  if (n == 0) {
    best.metric = squared_norm(target);
    return best;
  }
  refresh_from(0);
  const std::size_t last = n - 1;
  while (true) {
    const cplx* partial = &level[last * rows];
    for (std::size_t s = 0; s < m; ++s) {
      const cplx* col = &table[(last * m + s) * rows];
      double metric = 0.0;
      for (std::size_t r = 0; r < rows; ++r) metric += std::norm(partial[r] - col[r]);
      if (metric < best.metric) {
        best.metric = metric;
        best.ties = 0;
        idx[last] = s;
        best.indices = idx;
      } else if (metric == best.metric) {
        ++best.ties;
      }
    }
    idx[last] = 0;
    // advance the odometer on digits above the innermost one
    std::size_t d = last;
    while (d > 0) {
      --d;
      if (++idx[d] < m) break;
      idx[d] = 0;
      if (d == 0) return best;
    }
    if (last == 0) return best;
    refresh_from(d);
  }
}

/// Per-shape frequency-domain front end: the unitary DFT and the stacked
/// effective matrix diag(Lambda^{(p)}) F_trunc, where F_trunc keeps the first
/// N columns of F (the padded positions carry zeros).
class FrequencyDomain {
 public:
  explicit FrequencyDomain(const BlockShape& shape) : shape_(shape), roots_(shape.block_len()) {
    shape.validate();
    const std::size_t len = shape.block_len();
    for (std::size_t j = 0; j < len; ++j) roots_[j] = unit_root(j, len);
    dft_ = unitary_dft(len);
  }

  const BlockShape& shape() const noexcept { return shape_; }
  const CMatrix& dft() const noexcept { return dft_; }

  /// Stacked G with rows p * L + k and N columns.
  CMatrix effective_matrix(const ChannelRealization& ch) const {
    ch.check_shape(shape_);
    const std::size_t len = shape_.block_len();
    CMatrix g(shape_.m_rx * len, shape_.n_data);
    for (std::size_t p = 0; p < shape_.m_rx; ++p)
      for (std::size_t k = 0; k < len; ++k) {
        cplx lambda{};
        for (std::size_t m = 0; m <= shape_.nu; ++m) lambda += ch.taps(p, m) * roots_[(k * m) % len];
        for (std::size_t n = 0; n < shape_.n_data; ++n) g(p * len + k, n) = lambda * dft_(k, n);
      }
    return g;
  }

  /// Stacked F y^{(p)}.
  std::vector<cplx> transform(const ReceivedBlock& y) const {
    const std::size_t len = shape_.block_len();
    if (y.samples.rows() != shape_.m_rx || y.samples.cols() != len)
      throw std::invalid_argument("FrequencyDomain: received block does not match shape");
    std::vector<cplx> out(shape_.m_rx * len);
    for (std::size_t p = 0; p < shape_.m_rx; ++p)
      for (std::size_t k = 0; k < len; ++k) {
        cplx acc{};
        for (std::size_t n = 0; n < len; ++n) acc += dft_(k, n) * y.samples(p, n);
        out[p * len + k] = acc;
      }
    return out;
  }

 private:
  BlockShape shape_;
  std::vector<cplx> roots_;
  CMatrix dft_;
};

/// Frequency-domain ML over all N+nu bins of every antenna.
inline DetectionResult ml_detect(const ReceivedBlock& received, const ChannelRealization& ch,
                                 const Constellation& c, const BlockShape& shape,
                                 std::uint64_t budget = kDefaultSearchBudget) {
  const FrequencyDomain fd(shape);
  const SearchResult r = exhaustive_search(fd.transform(received), fd.effective_matrix(ch), c, budget);
  return {r.indices, std::nullopt, r.metric, r.ties};
}

/// Same decision rule on ||y - H x||^2 with the stacked circulant matrices.
inline DetectionResult ml_detect_time_domain(const ReceivedBlock& received, const ChannelRealization& ch,
                                             const Constellation& c, const BlockShape& shape,
                                             std::uint64_t budget = kDefaultSearchBudget) {
  const std::size_t len = shape.block_len();
  CMatrix g(shape.m_rx * len, shape.n_data);
  std::vector<cplx> target(shape.m_rx * len);
  for (std::size_t p = 0; p < shape.m_rx; ++p) {
    const CMatrix h = circulant_matrix(ch, p, shape);
    for (std::size_t r = 0; r < len; ++r) {
      target[p * len + r] = received.samples(p, r);
      for (std::size_t n = 0; n < shape.n_data; ++n) g(p * len + r, n) = h(r, n);
    }
  }
  const SearchResult res = exhaustive_search(target, g, c, budget);
  return {res.indices, std::nullopt, res.metric, res.ties};
}

/// One symbol followed by nu zeros: antenna p sees y_m^{(p)} = h_m^{(p)} s + z.
/// Returns argmin_s ||y - h s||^2 via the matched-filter statistic
/// u = sum conj(h) y: metric(s) = ||h||^2 |s|^2 - 2 Re(conj(s) u).
inline std::size_t matched_filter_detect(const CMatrix& burst, const ChannelRealization& ch,
                                         const Constellation& c) {
  if (burst.rows() != ch.m_rx() || burst.cols() != ch.n_taps())
    throw std::invalid_argument("matched_filter_detect: burst must be m_rx x (nu+1)");
  cplx u{};
  double energy = 0.0;
  for (std::size_t p = 0; p < burst.rows(); ++p)
    for (std::size_t m = 0; m < burst.cols(); ++m) {
      u += std::conj(ch.taps(p, m)) * burst(p, m);
      energy += std::norm(ch.taps(p, m));
    }
  std::size_t best = 0;
  double best_metric = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < c.size(); ++s) {
    const cplx pt = c.points[s];
    const double metric = energy * std::norm(pt) - 2.0 * std::real(std::conj(pt) * u);
    if (metric < best_metric) {
      best_metric = metric;
      best = s;
    }
  }
  return best;
}

/// Two-stage decoder on frequency observations `y_freq` with effective matrix `g`.
/// Stage 1 treats the low layer as noise. Stage 2 subtracts g x_H_hat (the
/// decision, right or wrong) and decodes the low layer.
inline DetectionResult sic_decode(std::span<const cplx> y_freq, const CMatrix& g, const LayerConstellations& layers,
                                  std::uint64_t budget = kDefaultSearchBudget) {
  const SearchResult high = exhaustive_search(y_freq, g, layers.high, budget);
  DetectionResult out{high.indices, std::nullopt, high.metric, high.ties};
  if (!layers.low) return out;

  std::vector<cplx> residual(y_freq.begin(), y_freq.end());
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t n = 0; n < g.cols(); ++n) residual[r] -= g(r, n) * layers.high.points[high.indices[n]];
  const SearchResult low = exhaustive_search(residual, g, *layers.low, budget);
  out.low_indices = low.indices;
  out.metric = low.metric;
  out.ties_broken += low.ties;
  return out;
}

inline DetectionResult sic_decode(const ReceivedBlock& received, const ChannelRealization& ch,
                                  const LayerConfig& cfg, const BlockShape& shape,
                                  std::uint64_t budget = kDefaultSearchBudget) {
  const LayerConstellations layers = make_layers(cfg);
  checked_search_size(layers.high.size(), shape.n_data, budget);
  if (layers.low) checked_search_size(layers.low->size(), shape.n_data, budget);
  const FrequencyDomain fd(shape);
  return sic_decode(fd.transform(received), fd.effective_matrix(ch), layers, budget);
}

}  // namespace dembed
