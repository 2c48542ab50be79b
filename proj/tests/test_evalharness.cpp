#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ddepth/evalharness.hpp"
#include "ddepth/rng.hpp"

using namespace ddepth;

namespace {

std::vector<EvalRecord> random_records(Rng& rng, int n, int hyps) {
  std::vector<EvalRecord> r(static_cast<std::size_t>(n));
  for (auto& x : r) {
    x.gt = std::exp(rng.uniform(0.0, 4.3));
    x.pred = x.gt * std::exp(rng.normal(0.0, 0.4));
    x.uncertainty = rng.uniform();
    for (int m = 0; m < hyps; ++m) x.hypotheses.push_back(x.gt * std::exp(rng.normal(0.0, 0.6)));
  }
  return r;
}

// The four-pixel fixture: ARE errors 1, 2, 3, 4 with increasing uncertainty.
std::vector<EvalRecord> four_pixels() {
  return {{2.0, 1.0, 0.1, {}}, {3.0, 1.0, 0.2, {}}, {4.0, 1.0, 0.3, {}}, {5.0, 1.0, 0.4, {}}};
}

}  // namespace

TEST(StandardMetrics, PerfectPredictions) {
  std::vector<EvalRecord> r{{3.0, 3.0, 0.0, {}}, {7.0, 7.0, 0.0, {}}};
  const auto m = standard_metrics(r);
  EXPECT_EQ(m.are, 0.0);
  EXPECT_EQ(m.rmse, 0.0);
  EXPECT_EQ(m.delta1, 1.0);
}

TEST(StandardMetrics, SinglePixelThirtyPercentOver) {
  const std::vector<EvalRecord> r{{13.0, 10.0, 0.0, {}}};
  const auto m = standard_metrics(r);
  EXPECT_NEAR(m.are, 0.3, 1e-15);
  EXPECT_EQ(m.delta1, 0.0);
  EXPECT_EQ(m.delta2, 1.0);
  EXPECT_EQ(m.delta3, 1.0);
}

TEST(StandardMetrics, MatchesDirectFormulas) {
  Rng rng(1);
  const auto r = random_records(rng, 10, 0);
  double are = 0, se = 0, sel = 0, l10 = 0, d1 = 0, d2 = 0, d3 = 0;
  for (const auto& x : r) {
    are += std::abs(x.pred - x.gt) / x.gt;
    se += std::pow(x.pred - x.gt, 2);
    sel += std::pow(std::log(x.pred) - std::log(x.gt), 2);
    l10 += std::abs(std::log10(x.pred) - std::log10(x.gt));
    const double t = std::max(x.pred / x.gt, x.gt / x.pred);
    d1 += t < 1.25;
    d2 += t < std::pow(1.25, 2);
    d3 += t < std::pow(1.25, 3);
  }
  const auto m = standard_metrics(r);
  EXPECT_NEAR(m.are, are / 10, 1e-10);
  EXPECT_NEAR(m.rmse, std::sqrt(se / 10), 1e-10);
  EXPECT_NEAR(m.rmse_log, std::sqrt(sel / 10), 1e-10);
  EXPECT_NEAR(m.log10, l10 / 10, 1e-10);
  EXPECT_NEAR(m.delta1, d1 / 10, 1e-10);
  EXPECT_NEAR(m.delta2, d2 / 10, 1e-10);
  EXPECT_NEAR(m.delta3, d3 / 10, 1e-10);
  EXPECT_NEAR(metric_value(Metric::rmse, r), m.rmse, 1e-12);
  EXPECT_NEAR(metric_value(Metric::one_minus_delta1, r), 1.0 - m.delta1, 1e-12);
}

TEST(StandardMetrics, RejectsBadInput) {
  EXPECT_THROW(standard_metrics(std::vector<EvalRecord>{}), ValidationError);
  EXPECT_THROW(standard_metrics(std::vector<EvalRecord>{{0.0, 1.0, 0.0, {}}}), ValidationError);
  EXPECT_THROW(standard_metrics(std::vector<EvalRecord>{{1.0, -1.0, 0.0, {}}}), ValidationError);
  EXPECT_THROW(standard_metrics(std::vector<EvalRecord>{{1.0, 1.0, NAN, {}}}), ValidationError);
}

TEST(Metric, NamesRoundTrip) {
  for (Metric m : kAllMetrics) EXPECT_EQ(parse_metric(metric_name(m)), m);
  EXPECT_THROW(parse_metric("mae"), ValidationError);
}

TEST(Sparsification, FourPixelFixture) {
  const std::vector<double> fr{0.25, 0.5, 0.75, 1.0};
  const auto c = sparsification(four_pixels(), Metric::are, fr);
  ASSERT_EQ(c.points.size(), 4u);
  const double expect[] = {1.0, 1.5, 2.0, 2.5};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(c.points[i].fraction, fr[i]);
    EXPECT_NEAR(c.points[i].value, expect[i], 1e-15);
  }
}

TEST(Sparsification, ConstantErrorGivesFlatCurve) {
  std::vector<EvalRecord> r(40, {1.2, 1.0, 0.5, {}});
  for (const auto& p : sparsification(r, Metric::are).points) EXPECT_NEAR(p.value, 0.2, 1e-12);
  EXPECT_NEAR(auc(sparsification(r, Metric::are)), 0.2, 1e-12);
}

TEST(Sparsification, DefaultFractionsAndTies) {
  const auto f = default_fractions();
  ASSERT_EQ(f.size(), 20u);
  EXPECT_DOUBLE_EQ(f.front(), 0.05);
  EXPECT_DOUBLE_EQ(f.back(), 1.0);
  // equal uncertainties keep input order: the first pixel alone is the 25% prefix
  std::vector<EvalRecord> r{{5.0, 1.0, 0.3, {}}, {2.0, 1.0, 0.3, {}}, {3.0, 1.0, 0.3, {}}, {4.0, 1.0, 0.3, {}}};
  EXPECT_DOUBLE_EQ(sparsification(r, Metric::are, std::vector<double>{0.25, 1.0}).points[0].value, 4.0);
  EXPECT_THROW(sparsification(r, Metric::are, std::vector<double>{0.5, 0.25}), ValidationError);
  EXPECT_THROW(sparsification(r, Metric::are, std::vector<double>{0.0, 1.0}), ValidationError);
}

TEST(Auc, Examples) {
  SparsificationCurve flat{Metric::are, {{0.5, 3.0}, {1.0, 3.0}}};
  EXPECT_DOUBLE_EQ(auc(flat), 3.0);
  SparsificationCurve ramp{Metric::are, {}};
  for (int i = 0; i <= 100; ++i) ramp.points.push_back({i / 100.0 + (i == 0 ? 1e-300 : 0.0), 4.0 * i / 100.0});
  EXPECT_NEAR(auc(ramp), 2.0, 1e-12);

  const auto c = sparsification(four_pixels(), Metric::are, std::vector<double>{0.25, 0.5, 0.75, 1.0});
  // trapezoids over (0,1) (0.25,1) (0.5,1.5) (0.75,2) (1,2.5)
  const double oracle = 0.25 * 1.0 + 0.25 * (1.0 + 1.5) / 2 + 0.25 * (1.5 + 2.0) / 2 + 0.25 * (2.0 + 2.5) / 2;
  EXPECT_NEAR(auc(c), oracle, 1e-15);
  EXPECT_NEAR(oracle, 1.5625, 1e-15);
  EXPECT_THROW(auc(SparsificationCurve{Metric::are, {{1.0, 1.0}}}), ValidationError);
}

TEST(OracleCurve, UncertaintyEqualToErrorMatchesOracle) {
  Rng rng(3);
  auto r = random_records(rng, 200, 0);
  for (auto& x : r) x.uncertainty = pixel_error(Metric::are, x.pred, x.gt);
  const auto a = sparsification(r, Metric::are);
  const auto b = oracle_curve(r, Metric::are);
  for (std::size_t i = 0; i < a.points.size(); ++i) EXPECT_DOUBLE_EQ(a.points[i].value, b.points[i].value);
}

TEST(OracleCurve, MonotoneAndBelowMethodOnSmallSets) {
  Rng rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const auto r = random_records(rng, 1 + static_cast<int>(rng.below(12)), 0);
    for (Metric m : kAllMetrics) {
      const auto o = oracle_curve(r, m);
      for (std::size_t i = 1; i < o.points.size(); ++i) ASSERT_GE(o.points[i].value, o.points[i - 1].value);
      ASSERT_GE(auc(sparsification(r, m)), auc(o) - 1e-12);
    }
  }
}

TEST(OracleMultihyp, Examples) {
  Rng rng(5);
  auto r = random_records(rng, 50, 4);
  std::vector<EvalRecord> first = r;
  for (auto& x : first) x.pred = x.hypotheses[0];
  EXPECT_NEAR(oracle_multihyp(r, 1, Metric::are), metric_value(Metric::are, first), 1e-15);

  for (auto& x : r) x.hypotheses[2] = x.gt;
  EXPECT_EQ(oracle_multihyp(r, 3, Metric::rmse), 0.0);

  EXPECT_THROW(oracle_multihyp(r, 5, Metric::are), ValidationError);
  EXPECT_THROW(oracle_multihyp(r, 0, Metric::are), ValidationError);
}

TEST(OracleMultihyp, NonIncreasingInM) {
  Rng rng(6);
  const auto r = random_records(rng, 300, 10);
  for (Metric m : kAllMetrics) {
    double prev = INFINITY;
    for (int k = 1; k <= 10; ++k) {
      const double v = oracle_multihyp(r, k, m);
      EXPECT_LE(v, prev);
      prev = v;
    }
  }
}

TEST(MetricProperty, PermutationInvariant) {
  Rng rng(7);
  auto r = random_records(rng, 100, 3);
  const auto before = standard_metrics(r);
  const double hyp = oracle_multihyp(r, 3, Metric::rmse_log);
  std::reverse(r.begin(), r.end());
  rng.shuffle(std::span<EvalRecord>(r));
  const auto after = standard_metrics(r);
  EXPECT_NEAR(after.are, before.are, 1e-12);
  EXPECT_NEAR(after.rmse, before.rmse, 1e-12);
  EXPECT_NEAR(after.log10, before.log10, 1e-12);
  EXPECT_EQ(after.delta1, before.delta1);
  EXPECT_NEAR(oracle_multihyp(r, 3, Metric::rmse_log), hyp, 1e-12);
}

TEST(Spearman, RanksAndCorrelation) {
  EXPECT_EQ(fractional_ranks(std::vector<double>{3.0, 1.0, 3.0, 2.0}), (std::vector<double>{3.5, 1.0, 3.5, 2.0}));
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman(x, std::vector<double>{10, 20, 30, 40, 100}), 1.0, 1e-15);
  EXPECT_NEAR(spearman(x, std::vector<double>{5, 4, 3, 2, 1}), -1.0, 1e-15);
  EXPECT_EQ(spearman(x, std::vector<double>(5, 2.0)), 0.0);
  EXPECT_THROW(spearman(x, std::vector<double>{1, 2}), ValidationError);
}
