#include <gtest/gtest.h>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/rational.hpp>

#include "dembed/experiment.hpp"
#include "dembed/report.hpp"

using namespace dembed;

namespace {

ErrorCurve synthetic(std::initializer_list<std::pair<double, double>> pts, std::uint64_t trials = 100'000'000) {
  ErrorCurve c;
  for (auto [db, p] : pts) {
    CurvePoint cp;
    cp.snr_db = db;
    cp.trials = trials;
    cp.errors_high = static_cast<std::uint64_t>(std::llround(p * static_cast<double>(trials)));
    c.points.push_back(cp);
  }
  return c;
}

double qfunc(double x) { return 0.5 * boost::math::erfc(x / std::sqrt(2.0)); }

// Rayleigh-averaged 4-QAM symbol error probability at average SNR p.
double rayleigh_qpsk_ser(double p) {
  boost::math::quadrature::exp_sinh<double> integrator;
  return integrator.integrate([p](double g) {
    const double q = qfunc(std::sqrt(g * p));
    return std::exp(-g) * (2.0 * q - q * q);
  });
}

SweepConfig flat_config() {
  SweepConfig cfg;
  cfg.shape = BlockShape{1, 0, 1};
  cfg.snr_grid_db = {10, 20};
  cfg.max_trials = 200'000;
  cfg.target_errors = 2000;
  return cfg;
}

}  // namespace

TEST(Wilson, HandValues) {
  const auto [lo, hi] = wilson_interval(0, 10);
  EXPECT_EQ(lo, 0.0);
  EXPECT_NEAR(hi, 3.8416 / 13.8416, 1e-12);
  // mirror symmetry
  const auto a = wilson_interval(3, 40);
  const auto b = wilson_interval(37, 40);
  EXPECT_NEAR(a.first, 1.0 - b.second, 1e-14);
  EXPECT_NEAR(a.second, 1.0 - b.first, 1e-14);
  // approaches the normal interval for large counts
  const auto w = wilson_interval(50'000, 1'000'000);
  const double half = 1.96 * std::sqrt(0.05 * 0.95 / 1e6);
  EXPECT_NEAR(w.second - w.first, 2 * half, 1e-6);
  EXPECT_EQ(wilson_interval(0, 0), std::make_pair(0.0, 1.0));
}

TEST(EstimateDiversity, ExactPowerLaws) {
  const auto d2 = estimate_diversity(synthetic({{10, 1e-2}, {20, 1e-4}, {30, 1e-6}}), {10, 30});
  EXPECT_NEAR(d2.slope, 2.0, 1e-6);
  EXPECT_LT(d2.std_error, 1e-5);
  EXPECT_EQ(d2.points_used, 3u);

  const auto d1 = estimate_diversity(synthetic({{0, 0.5}, {10, 0.05}, {20, 0.005}, {30, 0.0005}}), {0, 30});
  EXPECT_NEAR(d1.slope, 1.0, 1e-6);
}

TEST(EstimateDiversity, JitteredPowerLaw) {
  Xoshiro256 rng(12);
  std::uniform_real_distribution<double> jitter(0.9, 1.1);
  for (int rep = 0; rep < 50; ++rep) {
    ErrorCurve c;
    for (double db = 10; db <= 30; db += 2.5) {
      CurvePoint p;
      p.snr_db = db;
      // like a sweep stopped at a target error count: equal errors, trials vary
      p.errors_high = 1000;
      p.trials = static_cast<std::uint64_t>(1000.0 / (jitter(rng) * std::pow(10.0, -2.0 * db / 10.0 + 1.0)));
      c.points.push_back(p);
    }
    EXPECT_NEAR(estimate_diversity(c, {10, 30}).slope, 2.0, 0.1);
  }
}

TEST(EstimateDiversity, WindowAndMinimumErrors) {
  const auto c = synthetic({{10, 1e-2}, {20, 1e-4}, {30, 1e-9}});  // last point has 0 errors at 1e8 trials
  const auto d = estimate_diversity(c, {0, 40});
  EXPECT_EQ(d.points_used, 2u);
  EXPECT_EQ(d.std_error, 0.0);
  EXPECT_THROW(estimate_diversity(c, {25, 40}), insufficient_data);
  EXPECT_THROW(estimate_diversity(c, {0, 40}, Layer::low), insufficient_data);
}

TEST(Bounds, PublishedExamples) {
  const auto [h, l] = theoretical_bounds<double>(0.25, 0.0, BlockShape{3, 1, 1});
  EXPECT_NEAR(h.lower, 4.0 / 3.0, 1e-15);
  EXPECT_NEAR(h.upper, 1.5, 1e-15);
  const auto [h0, l0] = theoretical_bounds<double>(0.0, 0.0, BlockShape{3, 1, 1});
  EXPECT_EQ(h0.lower, 2.0);
  EXPECT_EQ(h0.upper, 2.0);
  EXPECT_EQ(l0.lower, 2.0);
  EXPECT_EQ(l0.upper, 2.0);
  const auto [hs, ls] = theoretical_bounds<double>(0.1, 0.2, BlockShape{3, 1, 2});
  EXPECT_NEAR(ls.lower, 2.4, 1e-12);
  EXPECT_NEAR(ls.upper, 2.8, 1e-12);
  EXPECT_NEAR(ls.rate, 0.3, 1e-15);
}

TEST(Bounds, ExactWithRationals) {
  using Q = boost::rational<long>;
  const auto [h, l] = theoretical_bounds<Q>(Q(1, 4), Q(1, 8), BlockShape{3, 1, 1});
  EXPECT_EQ(h.lower, Q(4, 3));
  EXPECT_EQ(h.upper, Q(3, 2));
  EXPECT_EQ(l.lower, Q(2) * (Q(1) - Q(4, 3) * Q(3, 8)));
  EXPECT_EQ(l.upper, Q(5, 4));
  // the rate cap is inclusive and exact
  EXPECT_NO_THROW(theoretical_bounds<Q>(Q(1, 2), Q(1, 4), BlockShape{3, 1, 1}));
  EXPECT_THROW(theoretical_bounds<Q>(Q(1, 2), Q(1, 4) + Q(1, 1000), BlockShape{3, 1, 1}), std::domain_error);
  EXPECT_THROW(theoretical_bounds<Q>(Q(-1, 4), Q(0), BlockShape{3, 1, 1}), std::domain_error);
}

TEST(ClassifyOutage, Examples) {
  EXPECT_FALSE(classify_outage(ChannelRealization::siso({1.0, 0.9}), 100.0, 1.0));
  EXPECT_TRUE(classify_outage(ChannelRealization::siso({0.001, cplx(0, 0.002)}), 100.0, 1.0));
}

TEST(SweepConfig, ValidationMessagesNameTheField) {
  SweepConfig cfg;
  cfg.shape = BlockShape{3, 1, 1};
  cfg.snr_grid_db = {10, 20};
  cfg.scheme = Scheme::superposition_sic;
  cfg.rate_mode = RateMode::scaling;
  cfg.r_tilde_high = 0.6;
  cfg.r_tilde_low = 0.6;
  cfg.beta = 0.7;
  try {
    cfg.validate();
    FAIL() << "expected a rate-constraint error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("rate constraint violated"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("N/(N+nu)"), std::string::npos);
  }
  cfg.r_tilde_low = 0.1;
  cfg.beta = 0.5;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.beta = 0.7;
  EXPECT_NO_THROW(cfg.validate());
  cfg.snr_grid_db = {20, 10};
  EXPECT_THROW(cfg.validate(), std::invalid_argument);

  SweepConfig big;
  big.shape = BlockShape{3, 1, 1};
  big.rate_mode = RateMode::scaling;
  big.r_tilde_high = 0.5;
  big.snr_grid_db = {20, 50};  // 2^8 points, 256^3 candidates
  EXPECT_THROW(big.validate(), budget_exceeded);
}

TEST(SweepConfig, BetaDefaultsAboveHighRate) {
  SweepConfig cfg;
  EXPECT_DOUBLE_EQ(cfg.resolved_beta(), 0.1);
  cfg.rate_mode = RateMode::scaling;
  cfg.r_tilde_high = 0.4;
  EXPECT_DOUBLE_EQ(cfg.resolved_beta(), 0.5);
  cfg.beta = 0.8;
  EXPECT_DOUBLE_EQ(cfg.resolved_beta(), 0.8);
}

TEST(RunSweep, FlatFadingMatchesRayleighIntegral) {
  // cross-check the quadrature against E[Q(sqrt(g p))] = (1 - sqrt(p / (2 + p))) / 2
  boost::math::quadrature::exp_sinh<double> integrator;
  const double p20 = 100.0;
  const double eq = integrator.integrate([&](double g) { return std::exp(-g) * qfunc(std::sqrt(g * p20)); });
  EXPECT_NEAR(eq, 0.5 * (1.0 - std::sqrt(p20 / (2.0 + p20))), 1e-12);

  const auto curve = run_sweep(flat_config());
  for (const auto& pt : curve.points) {
    const double oracle = rayleigh_qpsk_ser(db_to_linear(pt.snr_db));
    const auto [lo, hi] = pt.ci_high();
    const double se = (hi - lo) / (2 * 1.96);
    EXPECT_NEAR(pt.p_high(), oracle, 3 * se) << pt.snr_db << " dB";
  }
}

TEST(RunSweep, StoppingRule) {
  auto cfg = flat_config();
  cfg.target_errors = 50;
  const auto curve = run_sweep(cfg);
  for (const auto& pt : curve.points) {
    EXPECT_GE(pt.errors_high, 50u);
    EXPECT_EQ(pt.trials % 256, 0u);
    EXPECT_LT(pt.errors_high, 50u + 256u);
  }
  cfg.max_trials = 1000;
  cfg.target_errors = 1'000'000;
  for (const auto& pt : run_sweep(cfg).points) EXPECT_EQ(pt.trials, 1000u);
}

TEST(RunSweep, WorkerCountDoesNotChangeTheCurve) {
  SweepConfig cfg;
  cfg.shape = BlockShape{3, 1, 1};
  cfg.snr_grid_db = {5, 10, 15};
  cfg.max_trials = 20'000;
  cfg.target_errors = 300;
  cfg.master_seed = 77;
  const auto one = run_sweep(cfg, 1);
  const auto eight = run_sweep(cfg, 8);
  EXPECT_EQ(one, eight);
  EXPECT_EQ(curve_csv_string(one), curve_csv_string(eight));
  cfg.master_seed = 78;
  EXPECT_NE(run_sweep(cfg, 1), one);
}

TEST(RunSweep, MutedLowLayerReproducesSingleLayerRun) {
  SweepConfig base;
  base.shape = BlockShape{3, 1, 1};
  base.snr_grid_db = {6, 12};
  base.max_trials = 5000;
  base.target_errors = 100;
  SweepConfig muted = base;
  muted.scheme = Scheme::superposition_sic;
  muted.beta = 0.5;
  muted.low_muted = true;
  const auto a = run_sweep(base);
  const auto b = run_sweep(muted);
  EXPECT_EQ(a, b);
  EXPECT_FALSE(b.has_low_layer);

  const auto s = estimate_diversity(a, {6, 12});
  const auto t = estimate_diversity(b, {6, 12});
  EXPECT_EQ(s.slope, t.slope);
}

TEST(RunSweep, LayeredBookkeeping) {
  SweepConfig cfg;
  cfg.shape = BlockShape{2, 1, 1};
  cfg.scheme = Scheme::superposition_sic;
  cfg.beta = 0.5;
  cfg.snr_grid_db = {10, 20};
  cfg.max_trials = 4096;
  cfg.target_errors = 100;
  const auto curve = run_sweep(cfg);
  ASSERT_TRUE(curve.has_low_layer);
  for (const auto& pt : curve.points) {
    EXPECT_EQ(pt.errors_high, pt.errors_high_in_outage + pt.errors_high_no_outage);
    EXPECT_EQ(pt.errors_low, pt.errors_low_in_outage + pt.errors_low_no_outage);
    EXPECT_LE(pt.outage, pt.trials);
    // low layer keeps running until it also reaches the target
    EXPECT_TRUE(pt.errors_low >= 100 || pt.trials == 4096);
    EXPECT_EQ(pt.size_high, 4u);
    EXPECT_EQ(pt.size_low, 4u);
    EXPECT_EQ(pt.realized_r_tilde_high, std::log2(4.0) / std::log2(db_to_linear(pt.snr_db)));
  }
  // the low-layer outage set is larger: its threshold snr^-(1-beta) is higher
  EXPECT_GE(curve.points[0].outage_low, curve.points[0].outage);
}

TEST(RunSweep, MatchedFilterDecreasesWithSnr) {
  SweepConfig cfg;
  cfg.shape = BlockShape{3, 1, 1};
  cfg.scheme = Scheme::matched_filter;
  cfg.snr_grid_db = {0, 5, 10, 15};
  cfg.max_trials = 50'000;
  cfg.target_errors = 400;
  const auto curve = run_sweep(cfg);
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    EXPECT_LT(curve.points[i].ci_high().second, curve.points[i - 1].ci_high().first);
}

TEST(RunSweep, ScalingModeRecordsRealizedRates) {
  SweepConfig cfg;
  cfg.shape = BlockShape{2, 1, 1};
  cfg.rate_mode = RateMode::scaling;
  cfg.r_tilde_high = 0.5;
  cfg.snr_grid_db = {6.020599913279624 * 2, 6.020599913279624 * 3};
  cfg.max_trials = 512;
  const auto curve = run_sweep(cfg);
  EXPECT_EQ(curve.points[0].size_high, 4u);
  EXPECT_EQ(curve.points[1].size_high, 8u);
  for (const auto& pt : curve.points) EXPECT_NEAR(pt.realized_r_tilde_high, 0.5, 1e-12);
}

TEST(Refinement, ReportAndGridChecks) {
  auto layered = synthetic({{10, 1e-2}, {20, 1e-4}, {30, 1e-6}});
  layered.has_low_layer = true;
  for (auto& p : layered.points) p.errors_low = p.errors_high * 10;
  const auto baseline = synthetic({{10, 2e-2}, {20, 2e-4}, {30, 2e-6}});
  const auto s = refinement_report(layered, baseline, {10, 30}, 0.0, 0.0, BlockShape{3, 1, 1});
  EXPECT_NEAR(s.high.slope, 2.0, 1e-6);
  EXPECT_NEAR(s.baseline.slope, 2.0, 1e-6);
  EXPECT_TRUE(s.high_matches_baseline);
  EXPECT_EQ(s.high_bounds.lower, 2.0);

  auto shifted = baseline;
  shifted.points[1].snr_db = 21;
  EXPECT_THROW(refinement_report(layered, shifted, {10, 30}, 0, 0, BlockShape{3, 1, 1}), std::invalid_argument);
  EXPECT_THROW(refinement_report(baseline, baseline, {10, 30}, 0, 0, BlockShape{3, 1, 1}), std::invalid_argument);
}

TEST(Report, CsvRoundTripKeepsTheSlope) {
  auto cfg = flat_config();
  cfg.snr_grid_db = {10, 15, 20};
  cfg.target_errors = 300;
  const auto curve = run_sweep(cfg);
  std::istringstream in(curve_csv_string(curve));
  const auto back = read_curve_csv(in);
  ASSERT_EQ(back.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.points[i].trials, curve.points[i].trials);
    EXPECT_EQ(back.points[i].errors_high, curve.points[i].errors_high);
    EXPECT_EQ(back.points[i].snr_db, curve.points[i].snr_db);
  }
  EXPECT_EQ(estimate_diversity(back, {10, 20}).slope, estimate_diversity(curve, {10, 20}).slope);
}

TEST(Report, MissingColumnsAreListed) {
  std::istringstream in("snr_db,trials,p_high\n10,100,0.1\n");
  try {
    read_curve_csv(in);
    FAIL();
  } catch (const schema_error& e) {
    EXPECT_NE(std::find(e.missing_columns.begin(), e.missing_columns.end(), "errors_high"), e.missing_columns.end());
    EXPECT_NE(std::find(e.missing_columns.begin(), e.missing_columns.end(), "outage"), e.missing_columns.end());
  }
}
