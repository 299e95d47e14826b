#pragma once

// Quasi-static Rayleigh ISI channel: sampling, and application to zero-padded
// blocks. Noise variance is fixed at one, so SNR is carried by the transmit
// constellation power.

#include <span>
#include <stdexcept>
#include <vector>

#include "dembed/rng.hpp"
#include "dembed/types.hpp"

namespace dembed {

/// Tap gains h_m^{(p)}: one row per receive antenna, nu+1 columns.
/// Immutable once drawn, so it can be shared freely across workers.
struct ChannelRealization {
  CMatrix taps;

  std::size_t m_rx() const noexcept { return taps.rows(); }
  std::size_t n_taps() const noexcept { return taps.cols(); }

  void check_shape(const BlockShape& shape) const {
    if (taps.rows() != shape.m_rx || taps.cols() != shape.n_taps())
      throw std::invalid_argument("ChannelRealization: tap matrix does not match block shape");
  }

  /// Single-antenna channel from a tap list.
  static ChannelRealization siso(std::initializer_list<cplx> h) {
    ChannelRealization ch{CMatrix(1, h.size())};
    std::size_t m = 0;
    for (const cplx& v : h) ch.taps(0, m++) = v;
    return ch;
  }
};

/// Time-domain samples, one row per receive antenna, block_len columns.
struct ReceivedBlock {
  CMatrix samples;
};

template <class Rng>
ChannelRealization sample_channel(Rng& rng, const BlockShape& shape) {
  shape.validate();
  ComplexGaussian cn(1.0);
  ChannelRealization ch{CMatrix(shape.m_rx, shape.n_taps())};
  for (std::size_t p = 0; p < shape.m_rx; ++p)
    for (std::size_t m = 0; m < shape.n_taps(); ++m) ch.taps(p, m) = cn(rng);
  return ch;
}

namespace detail {

inline void check_padded(std::span<const cplx> x, const BlockShape& shape) {
  if (x.size() != shape.block_len())
    throw std::invalid_argument("block length must equal n_data + nu");
  for (std::size_t n = shape.n_data; n < x.size(); ++n)
    if (x[n] != cplx{}) throw std::invalid_argument("block is not zero padded: trailing nu entries must be zero");
}

}  // namespace detail

/// Noiseless linear convolution y^{(p)}[n] = sum_m h_m^{(p)} x[n-m] over one block.
inline ReceivedBlock convolve_block(std::span<const cplx> x, const ChannelRealization& ch,
                                    const BlockShape& shape) {
  ch.check_shape(shape);
  detail::check_padded(x, shape);
  const std::size_t len = shape.block_len();
  ReceivedBlock out{CMatrix(shape.m_rx, len)};
  for (std::size_t p = 0; p < shape.m_rx; ++p)
    for (std::size_t n = 0; n < len; ++n) {
      cplx acc{};
      for (std::size_t m = 0; m <= shape.nu && m <= n; ++m) acc += ch.taps(p, m) * x[n - m];
      out.samples(p, n) = acc;
    }
  return out;
}

/// Explicit circulant matrix H^{(p)} whose first column is (h_0, ..., h_nu, 0, ..., 0).
inline CMatrix circulant_matrix(const ChannelRealization& ch, std::size_t antenna,
                                const BlockShape& shape) {
  ch.check_shape(shape);
  const std::size_t len = shape.block_len();
  CMatrix h(len, len);
  for (std::size_t c = 0; c < len; ++c)
    for (std::size_t m = 0; m <= shape.nu; ++m) h((c + m) % len, c) = ch.taps(antenna, m);
  return h;
}

/// Noiseless H^{(p)} x for every antenna via the circulant matrix. Agrees with
/// convolve_block because the block is zero padded.
inline ReceivedBlock circulant_multiply(std::span<const cplx> x, const ChannelRealization& ch,
                                        const BlockShape& shape) {
  detail::check_padded(x, shape);
  const std::size_t len = shape.block_len();
  ReceivedBlock out{CMatrix(shape.m_rx, len)};
  for (std::size_t p = 0; p < shape.m_rx; ++p) {
    const CMatrix h = circulant_matrix(ch, p, shape);
    for (std::size_t r = 0; r < len; ++r) {
      cplx acc{};
      for (std::size_t c = 0; c < len; ++c) acc += h(r, c) * x[c];
      out.samples(p, r) = acc;
    }
  }
  return out;
}

/// Transmit one zero-padded block: convolution plus noise_std * CN(0,1) per sample.
template <class Rng>
ReceivedBlock apply_channel(std::span<const cplx> x, const ChannelRealization& ch,
                            const BlockShape& shape, double noise_std, Rng& rng) {
  if (noise_std < 0.0) throw std::invalid_argument("noise_std must be non-negative");
  ReceivedBlock y = convolve_block(x, ch, shape);
  if (noise_std > 0.0) {
    ComplexGaussian cn(1.0);
    for (std::size_t p = 0; p < y.samples.rows(); ++p)
      for (std::size_t n = 0; n < y.samples.cols(); ++n) y.samples(p, n) += noise_std * cn(rng);
  }
  return y;
}

}  // namespace dembed
