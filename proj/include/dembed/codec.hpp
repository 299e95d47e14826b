#pragma once

// QAM constellations, zero-padded block encoding and two-layer superposition.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dembed/types.hpp"

namespace dembed {

struct Constellation {
  std::vector<cplx> points;
  double avg_power = 0.0;
  double min_dist_sq = 0.0;
  double max_amplitude = 0.0;

  std::size_t size() const noexcept { return points.size(); }
};

namespace detail {

inline std::uint32_t gray_decode(std::uint32_t g) noexcept {
  std::uint32_t v = g;
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) v ^= v >> shift;
  return v;
}

}  // namespace detail

/// M-QAM scaled to average power `power`.
///
/// M = 2^m is split as 2^ceil(m/2) levels in-phase by 2^floor(m/2) in
/// quadrature (M = 2 is BPSK on the real axis). Index bits are the
/// concatenated Gray labels (in-phase label in the high bits), so index 0 sits
/// at the most negative corner: (-1-j)/sqrt(2) for unit-power 4-QAM.
inline Constellation make_qam(std::size_t size, double power) {
  if (size < 2 || !std::has_single_bit(size))
    throw std::invalid_argument("make_qam: size must be a power of two >= 2, got " + std::to_string(size));
  if (!(power >= 0.0)) throw std::invalid_argument("make_qam: power must be non-negative");

  const unsigned bits = static_cast<unsigned>(std::countr_zero(size));
  const unsigned q_bits = bits / 2;
  const unsigned i_bits = bits - q_bits;
  const std::uint32_t i_levels = 1u << i_bits;
  const std::uint32_t q_levels = 1u << q_bits;

  // Mean energy of odd-integer PAM with L levels is (L^2 - 1) / 3.
  const double raw_power = (static_cast<double>(i_levels) * i_levels - 1.0) / 3.0 +
                           (static_cast<double>(q_levels) * q_levels - 1.0) / 3.0;
  const double scale = std::sqrt(power / raw_power);

  Constellation c;
  c.points.resize(size);
  for (std::uint32_t idx = 0; idx < size; ++idx) {
    const std::uint32_t i_level = detail::gray_decode(idx >> q_bits);
    const std::uint32_t q_level = detail::gray_decode(idx & (q_levels - 1));
    const double re = 2.0 * i_level - (i_levels - 1.0);
    const double im = 2.0 * q_level - (q_levels - 1.0);
    c.points[idx] = scale * cplx(re, im);
  }
  c.avg_power = power;
  c.min_dist_sq = 4.0 * scale * scale;
  c.max_amplitude = scale * std::hypot(i_levels - 1.0, q_levels - 1.0);
  return c;
}

/// Constellation size for a raw rate exponent: 2^round(log2(snr^r_tilde)),
/// at least 2. r_tilde == 0 selects the fixed-rate size.
inline std::size_t size_for_rate(double snr, double r_tilde, std::size_t fixed_size = 4) {
  if (!(r_tilde >= 0.0)) throw std::invalid_argument("size_for_rate: r_tilde must be non-negative");
  if (r_tilde == 0.0) return fixed_size;
  if (!(snr > 1.0)) throw std::invalid_argument("size_for_rate: snr must exceed 1");
  const double exponent = std::round(r_tilde * std::log2(snr));
  const int e = std::max(1, static_cast<int>(exponent));
  if (e > 30) throw std::invalid_argument("size_for_rate: constellation too large");
  return std::size_t{1} << e;
}

/// Effective multiplexing gain after the nu-symbol padding overhead.
inline double effective_rate(double r_tilde, const BlockShape& shape) {
  return r_tilde * static_cast<double>(shape.n_data) / static_cast<double>(shape.block_len());
}

/// Map N indices to a block of N symbols followed by nu zeros.
inline std::vector<cplx> encode_block(std::span<const std::size_t> symbols, const Constellation& c,
                                      const BlockShape& shape) {
  if (symbols.size() != shape.n_data) throw std::invalid_argument("encode_block: need exactly n_data symbols");
  std::vector<cplx> block(shape.block_len());
  for (std::size_t n = 0; n < symbols.size(); ++n) {
    if (symbols[n] >= c.size()) throw std::out_of_range("encode_block: symbol index out of range");
    block[n] = c.points[symbols[n]];
  }
  return block;
}

/// Two-layer operating point. The high layer has power snr and raw rate
/// r_tilde_high; the low layer has power snr^(1-beta) and raw rate r_tilde_low.
/// A rate of zero means fixed-rate mode with the configured size.
struct LayerConfig {
  double r_tilde_high = 0.0;
  double r_tilde_low = 0.0;
  double beta = 0.1;
  double snr = 100.0;
  std::size_t fixed_size_high = 4;
  std::size_t fixed_size_low = 4;
  bool low_muted = false;  // zero-power low layer; reduces to single-layer transmission

  void validate() const {
    if (!(r_tilde_high >= 0.0 && r_tilde_high < 1.0))
      throw std::invalid_argument("LayerConfig: r_tilde_high must lie in [0,1)");
    if (!(r_tilde_low >= 0.0)) throw std::invalid_argument("LayerConfig: r_tilde_low must be non-negative");
    if (!(beta > r_tilde_high))
      throw std::invalid_argument("LayerConfig: beta must exceed r_tilde_high to preserve the high-layer minimum distance");
    if (!(beta <= 1.0)) throw std::invalid_argument("LayerConfig: beta must not exceed 1");
    if (r_tilde_high + r_tilde_low > 1.0 + 1e-12)
      throw std::invalid_argument("LayerConfig: r_H + r_L must not exceed N/(N+nu)");
  }
};

struct LayerConstellations {
  Constellation high;
  std::optional<Constellation> low;
};

inline LayerConstellations make_layers(const LayerConfig& cfg) {
  cfg.validate();
  LayerConstellations layers;
  layers.high = make_qam(size_for_rate(cfg.snr, cfg.r_tilde_high, cfg.fixed_size_high), cfg.snr);
  if (!cfg.low_muted)
    layers.low = make_qam(size_for_rate(cfg.snr, cfg.r_tilde_low, cfg.fixed_size_low),
                          std::pow(cfg.snr, 1.0 - cfg.beta));
  return layers;
}

/// d_min^H - 2 max|x_L|. Positive means the low layer can never push a
/// high-layer point across a decision boundary on its own.
inline double superposition_margin(const LayerConstellations& layers) {
  const double interference = layers.low ? layers.low->max_amplitude : 0.0;
  return std::sqrt(layers.high.min_dist_sq) - 2.0 * interference;
}

struct LayeredCodeword {
  std::vector<std::size_t> high_symbols;
  std::vector<std::size_t> low_symbols;  // empty when the low layer is muted
  std::vector<cplx> time_block;
};

inline LayeredCodeword superpose(const LayerConstellations& layers, std::span<const std::size_t> high,
                                 std::span<const std::size_t> low, const BlockShape& shape) {
  LayeredCodeword cw;
  cw.high_symbols.assign(high.begin(), high.end());
  cw.time_block = encode_block(high, layers.high, shape);
  if (layers.low) {
    const std::vector<cplx> low_block = encode_block(low, *layers.low, shape);
    for (std::size_t n = 0; n < shape.n_data; ++n) cw.time_block[n] += low_block[n];
    cw.low_symbols.assign(low.begin(), low.end());
  }
  return cw;
}

inline LayeredCodeword superpose(const LayerConfig& cfg, std::span<const std::size_t> high,
                                 std::span<const std::size_t> low, const BlockShape& shape) {
  return superpose(make_layers(cfg), high, low, shape);
}

}  // namespace dembed
