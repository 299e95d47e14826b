#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include "dembed/dembed.hpp"

namespace dembed::test {

inline double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double max_abs(std::span<const cplx> a) {
  double d = 0.0;
  for (const cplx& v : a) d = std::max(d, std::abs(v));
  return d;
}

/// Random zero-padded block of Gaussian entries.
template <class Rng>
std::vector<cplx> random_block(Rng& rng, const BlockShape& shape) {
  ComplexGaussian cn(1.0);
  std::vector<cplx> x(shape.block_len());
  for (std::size_t n = 0; n < shape.n_data; ++n) x[n] = cn(rng);
  return x;
}

/// Textbook DFT of the zero-extended taps, written independently of the library.
inline std::vector<cplx> naive_lambda(std::span<const cplx> h, std::size_t len) {
  const double pi = std::acos(-1.0);
  std::vector<cplx> out(len);
  for (std::size_t k = 0; k < len; ++k)
    for (std::size_t m = 0; m < h.size(); ++m)
      out[k] += h[m] * std::polar(1.0, -2.0 * pi * static_cast<double>(k * m) / static_cast<double>(len));
  return out;
}

}  // namespace dembed::test
