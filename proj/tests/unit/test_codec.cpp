#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "dembed/codec.hpp"

using namespace dembed;

namespace {

double min_dist_sq_brute(const Constellation& c) {
  double best = INFINITY;
  for (std::size_t a = 0; a < c.size(); ++a)
    for (std::size_t b = a + 1; b < c.size(); ++b) best = std::min(best, std::norm(c.points[a] - c.points[b]));
  return best;
}

double mean_power(const Constellation& c) {
  double s = 0.0;
  for (const cplx& p : c.points) s += std::norm(p);
  return s / c.size();
}

}  // namespace

TEST(MakeQam, UnitPowerQpsk) {
  const auto c = make_qam(4, 1.0);
  const double r = 1.0 / std::sqrt(2.0);
  EXPECT_LT(std::abs(c.points[0] - cplx(-r, -r)), 1e-15);
  EXPECT_NEAR(c.min_dist_sq, 2.0, 1e-14);
  for (const cplx& p : c.points) EXPECT_NEAR(std::abs(p), 1.0, 1e-15);
}

TEST(MakeQam, SixteenQamDistance) { EXPECT_NEAR(make_qam(16, 1.0).min_dist_sq, 0.4, 1e-14); }

TEST(MakeQam, PowerScalesLinearly) { EXPECT_NEAR(make_qam(4, 100.0).min_dist_sq, 200.0, 1e-12); }

TEST(MakeQam, MetadataMatchesPointSet) {
  for (std::size_t m = 2; m <= 1024; m *= 2) {
    const auto c = make_qam(m, 3.5);
    ASSERT_EQ(c.size(), m);
    EXPECT_NEAR(mean_power(c), 3.5, 1e-12) << m;
    EXPECT_NEAR(c.min_dist_sq, min_dist_sq_brute(c), 1e-12) << m;
    double amax = 0.0;
    for (const cplx& p : c.points) amax = std::max(amax, std::abs(p));
    EXPECT_NEAR(c.max_amplitude, amax, 1e-12) << m;
  }
}

// Neighbours along either axis differ in exactly one label bit.
TEST(MakeQam, GrayLabelling) {
  for (std::size_t m : {4u, 8u, 16u, 64u}) {
    const auto c = make_qam(m, 1.0);
    const double d = std::sqrt(c.min_dist_sq);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b)
        if (std::abs(std::abs(c.points[a] - c.points[b]) - d) < 1e-9) {
          EXPECT_EQ(std::popcount(a ^ b), 1) << m << ": " << a << " vs " << b;
        }
  }
}

TEST(MakeQam, RejectsBadInput) {
  EXPECT_THROW(make_qam(6, 1.0), std::invalid_argument);
  EXPECT_THROW(make_qam(1, 1.0), std::invalid_argument);
  EXPECT_THROW(make_qam(4, -1.0), std::invalid_argument);
  EXPECT_NO_THROW(make_qam(4, 0.0));
}

TEST(SizeForRate, Examples) {
  EXPECT_EQ(size_for_rate(100.0, 0.5), 8u);
  EXPECT_EQ(size_for_rate(1000.0, 1.0), 1024u);
  for (double snr : {2.0, 10.0, 1e6}) EXPECT_EQ(size_for_rate(snr, 0.0, 4), 4u);
  EXPECT_EQ(size_for_rate(1.5, 0.1), 2u);  // floor at BPSK
  EXPECT_THROW(size_for_rate(1.0, 0.5), std::invalid_argument);
  EXPECT_EQ(size_for_rate(0.5, 0.0, 16), 16u);  // fixed mode ignores snr
  EXPECT_THROW(size_for_rate(10.0, -0.5), std::invalid_argument);
}

TEST(EffectiveRate, PaddingOverhead) {
  EXPECT_DOUBLE_EQ(effective_rate(1.0, BlockShape{3, 1, 1}), 0.75);
  EXPECT_DOUBLE_EQ(effective_rate(0.0, BlockShape{3, 1, 1}), 0.0);
  EXPECT_DOUBLE_EQ(effective_rate(0.6, BlockShape{5, 0, 1}), 0.6);
}

TEST(EncodeBlock, IndexOrderAndPadding) {
  const BlockShape shape{3, 1, 1};
  const auto c = make_qam(4, 1.0);
  const std::vector<std::size_t> zeros = {0, 0, 0};
  const auto x = encode_block(zeros, c, shape);
  ASSERT_EQ(x.size(), 4u);
  const cplx corner = cplx(-1.0, -1.0) / std::sqrt(2.0);
  for (int n = 0; n < 3; ++n) EXPECT_LT(std::abs(x[n] - corner), 1e-15);
  EXPECT_EQ(x[3], cplx(0.0));

  const auto flat = encode_block(std::vector<std::size_t>{3}, c, BlockShape{1, 0, 1});
  EXPECT_EQ(flat.size(), 1u);

  EXPECT_THROW(encode_block(std::vector<std::size_t>{0, 4, 0}, c, shape), std::out_of_range);
  EXPECT_THROW(encode_block(std::vector<std::size_t>{0, 0}, c, shape), std::invalid_argument);
}

TEST(Superpose, PowerSplitAndAmplitudeBound) {
  const BlockShape shape{3, 1, 1};
  LayerConfig cfg;
  cfg.snr = 100.0;
  cfg.beta = 0.5;
  const auto layers = make_layers(cfg);
  ASSERT_TRUE(layers.low.has_value());
  EXPECT_NEAR(layers.high.avg_power, 100.0, 1e-12);
  EXPECT_NEAR(layers.low->avg_power, 10.0, 1e-12);
  const double per_dim = std::sqrt(50.0) + std::sqrt(5.0);
  for (std::size_t h = 0; h < 4; ++h)
    for (std::size_t l = 0; l < 4; ++l) {
      const std::vector<std::size_t> hi = {h, 0, 3}, lo = {l, 2, 1};
      const auto cw = superpose(cfg, hi, lo, shape);
      for (const cplx& v : cw.time_block) {
        EXPECT_LE(std::abs(v.real()), per_dim + 1e-12);
        EXPECT_LE(std::abs(v.imag()), per_dim + 1e-12);
      }
      EXPECT_EQ(cw.time_block[3], cplx(0.0));
    }
  EXPECT_GT(superposition_margin(layers), 0.0);
}

TEST(Superpose, AllZeroIndicesRepeatTheCornerSum) {
  const BlockShape shape{3, 1, 1};
  LayerConfig cfg;
  cfg.snr = 100.0;
  cfg.beta = 0.5;
  const auto layers = make_layers(cfg);
  const std::vector<std::size_t> z = {0, 0, 0};
  const auto cw = superpose(layers, z, z, shape);
  const cplx expect = layers.high.points[0] + layers.low->points[0];
  for (int n = 0; n < 3; ++n) EXPECT_LT(std::abs(cw.time_block[n] - expect), 1e-12);
}

TEST(Superpose, MutedLowLayerIsSingleLayerEncode) {
  const BlockShape shape{3, 1, 1};
  LayerConfig cfg;
  cfg.snr = 316.0;
  cfg.low_muted = true;
  cfg.beta = 1.0;
  const auto layers = make_layers(cfg);
  EXPECT_FALSE(layers.low.has_value());
  const std::vector<std::size_t> hi = {1, 2, 3};
  const auto cw = superpose(layers, hi, {}, shape);
  EXPECT_EQ(cw.time_block, encode_block(hi, layers.high, shape));
  EXPECT_TRUE(cw.low_symbols.empty());
  EXPECT_EQ(superposition_margin(layers), std::sqrt(layers.high.min_dist_sq));
}

TEST(LayerConfig, Validation) {
  LayerConfig cfg;
  cfg.r_tilde_high = 0.3;
  cfg.beta = 0.3;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);  // beta must exceed r_tilde_high
  cfg.beta = 1.2;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.beta = 0.4;
  cfg.r_tilde_low = 0.8;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.r_tilde_low = 0.5;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_DOUBLE_EQ(LayerConfig{}.beta, 0.1);
}

// The high layer's decision regions survive the low layer once snr^beta > 2
// for 4/4-QAM: d_min^H = sqrt(2 snr) against 2 max|x_L| = 2 snr^((1-beta)/2).
TEST(Superpose, MarginCrossingForFixedQpsk) {
  for (double beta : {0.3, 0.5, 0.8}) {
    const double crossing = std::pow(2.0, 1.0 / beta);
    for (double f : {0.9, 1.1}) {
      LayerConfig cfg;
      cfg.beta = beta;
      cfg.snr = crossing * f;
      const double margin = superposition_margin(make_layers(cfg));
      if (f < 1.0)
        EXPECT_LT(margin, 0.0) << beta;
      else
        EXPECT_GT(margin, 0.0) << beta;
    }
  }
}

// In scaling mode d_min^H grows like snr^((1 - r_H)/2) while the low-layer peak
// grows like snr^((1 - beta)/2), so with beta > r_H the interference becomes
// negligible relative to the high-layer spacing.
TEST(Superpose, ScalingModeMarginApproachesHighLayerSpacing) {
  LayerConfig cfg;
  cfg.r_tilde_high = 0.5;
  cfg.r_tilde_low = 0.05;
  cfg.beta = 0.9;
  double normalized = 0.0;
  for (double db = 40; db <= 100; db += 20) {
    cfg.snr = std::pow(10.0, db / 10.0);
    const auto layers = make_layers(cfg);
    normalized = superposition_margin(layers) / std::sqrt(layers.high.min_dist_sq);
    EXPECT_GT(normalized, 0.0) << db;
    EXPECT_LE(normalized, 1.0) << db;
  }
  EXPECT_GT(normalized, 0.9);
}
