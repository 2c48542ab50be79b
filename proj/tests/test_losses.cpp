#include <gtest/gtest.h>

#include <cmath>

#include "ddepth/distribution.hpp"
#include "ddepth/losses.hpp"
#include "ddepth/rng.hpp"
#include "test_support.hpp"

using namespace ddepth;
using testing_support::numeric_grad;
using testing_support::relative_error;

namespace {

const DepthBinning kBins(1.0, 80.0, 64);

std::vector<double> random_vector(Rng& rng, int n, double scale) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = rng.normal(0.0, scale);
  return v;
}

// Naive reference for the two classification losses.
double reference_multiclass(const std::vector<double>& s, const std::vector<double>& q) {
  double z = 0.0;
  for (double v : s) z += std::exp(v);
  double l = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) l -= q[k] * std::log(std::exp(s[k]) / z);
  return l;
}

double reference_binary(const std::vector<double>& s, const std::vector<double>& q) {
  double l = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double mu = 1.0 / (1.0 + std::exp(-s[k]));
    l -= q[k] * std::log(mu) + (1.0 - q[k]) * std::log(1.0 - mu);
  }
  return l;
}

}  // namespace

TEST(LossNames, ParseAndList) {
  for (auto k : kAllLosses) EXPECT_EQ(parse_loss(loss_name(k)), k);
  EXPECT_EQ(valid_loss_names(), "multiclass, binary, l2, berhu, gaussian, ordinal, mhl");
  try {
    parse_loss("hinge");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("multiclass, binary"), std::string::npos);
  }
  EXPECT_EQ(output_dim(LossKind::ordinal, 64), 63);
  EXPECT_EQ(output_dim(LossKind::mhl, 64, 3), 3);
  EXPECT_EQ(output_dim(LossKind::gaussian, 64), 2);
}

TEST(MulticlassLoss, PerfectOneHotIsZero) {
  std::vector<double> s(8, -800.0);
  s[2] = 0.0;
  const auto t = make_soft_target(DepthBinning(1, 80, 8), 3, 0.0, TargetKind::one_hot);
  const auto r = multiclass_loss(s, t);
  EXPECT_EQ(r.value, 0.0);
  for (double g : r.grad) EXPECT_EQ(g, 0.0);
}

TEST(MulticlassLoss, UniformScoresOneHot) {
  const auto t = make_soft_target(kBins, 40, 0.0, TargetKind::one_hot);
  EXPECT_NEAR(multiclass_loss(std::vector<double>(64, 0.3), t).value, std::log(64.0), 1e-12);
}

TEST(MulticlassLoss, MatchesReferenceAndGradientIdentity) {
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_vector(rng, 64, 2.0);
    const auto t = make_soft_target(kBins, 1 + static_cast<int>(rng.below(64)), 2.768, TargetKind::normalized);
    const auto r = multiclass_loss(s, t);
    EXPECT_NEAR(r.value, reference_multiclass(s, t.values), 1e-10);
    const auto mu = normalize(s);
    for (int k = 0; k < 64; ++k) EXPECT_NEAR(r.grad[k], mu.probs()[k] - t.values[k], 1e-15);
  }
}

TEST(BinaryLoss, LogitOfTargetIsStationary) {
  const auto t = make_soft_target(kBins, 30, 2.768, TargetKind::unnormalized);
  std::vector<double> s(64);
  for (int k = 0; k < 64; ++k) {
    const double q = std::clamp(t.values[k], 1e-12, 1.0 - 1e-12);
    s[k] = std::log(q / (1.0 - q));
  }
  const auto r = binary_loss(s, t);
  double norm = 0.0;
  for (double g : r.grad) norm += g * g;
  EXPECT_LT(std::sqrt(norm), 1e-8);
}

TEST(BinaryLoss, ZeroTargetZeroScores) {
  SoftTarget t;
  t.values.assign(64, 0.0);
  t.kind = TargetKind::unnormalized;
  EXPECT_NEAR(binary_loss(std::vector<double>(64, 0.0), t).value, 64.0 * std::log(2.0), 1e-12);
}

TEST(BinaryLoss, MatchesReference) {
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const auto s = random_vector(rng, 64, 3.0);
    const auto t = make_soft_target(kBins, 1 + static_cast<int>(rng.below(64)), 2.768, TargetKind::unnormalized);
    EXPECT_NEAR(binary_loss(s, t).value, reference_binary(s, t.values), 1e-9);
  }
}

TEST(BinaryLoss, FiniteForSaturatedScores) {
  const auto t = make_soft_target(kBins, 10, 2.0, TargetKind::unnormalized);
  std::vector<double> s(64, 900.0);
  s[10] = -900.0;
  const auto r = binary_loss(s, t);
  EXPECT_TRUE(std::isfinite(r.value));
  EXPECT_GT(r.value, 0.0);
}

TEST(ClassificationLosses, SizeMismatchThrows) {
  const auto t = make_soft_target(kBins, 10, 2.0, TargetKind::normalized);
  EXPECT_THROW(multiclass_loss(std::vector<double>(63, 0.0), t), ValidationError);
  EXPECT_THROW(binary_loss(std::vector<double>(65, 0.0), t), ValidationError);
}

TEST(L2LogLoss, Examples) {
  EXPECT_EQ(l2_log_loss(1.7, 1.7).value, 0.0);
  const auto r = l2_log_loss(3.0, 2.0);
  EXPECT_DOUBLE_EQ(r.value, 1.0);
  EXPECT_DOUBLE_EQ(r.grad[0], 2.0);
}

TEST(BerhuLoss, ExamplesAndContinuity) {
  EXPECT_EQ(berhu_loss(2.0, 2.0, 0.3).value, 0.0);
  const double c = 0.37;
  EXPECT_NEAR(berhu_loss(1.0 + c, 1.0, c).value, c, 1e-15);
  const auto outside = berhu_loss(1.0 + c + 1e-12, 1.0, c);
  EXPECT_NEAR(outside.value, c, 1e-11);
  EXPECT_NEAR(outside.grad[0], 1.0, 1e-10);
  EXPECT_NEAR(berhu_loss(1.0 - c - 1e-12, 1.0, c).grad[0], -1.0, 1e-10);
  EXPECT_THROW(berhu_loss(0.0, 0.0, 0.0), ValidationError);
}

TEST(BerhuThreshold, FractionOfLargestResidual) {
  EXPECT_DOUBLE_EQ(berhu_threshold(std::vector<double>{0.1, -2.0, 1.0}), 0.4);
  EXPECT_DOUBLE_EQ(berhu_threshold(std::vector<double>{0.5}, 0.5), 0.25);
  EXPECT_DOUBLE_EQ(berhu_threshold(std::vector<double>{0.0}), 1e-6);
}

TEST(GaussianNll, Examples) {
  const auto r = gaussian_nll_loss(2.0, 0.8, 2.0);
  EXPECT_DOUBLE_EQ(r.value, 0.4);
  EXPECT_EQ(r.grad[0], 0.0);
  // at exp(log_variance) = r^2 the log-variance partial vanishes
  const double res = 0.7;
  EXPECT_NEAR(gaussian_nll_loss(1.0, std::log(res * res), 1.0 + res).grad[1], 0.0, 1e-15);
}

TEST(OrdinalLoss, TargetsAtTheEnds) {
  const int k = 8;
  std::vector<double> s(k - 1, 0.0);
  const auto first = ordinal_loss(s, 1);
  for (double g : first.grad) EXPECT_DOUBLE_EQ(g, 0.5);  // all targets 0
  const auto last = ordinal_loss(s, k);
  for (double g : last.grad) EXPECT_DOUBLE_EQ(g, -0.5);  // all targets 1
  EXPECT_THROW(ordinal_loss(s, 0), ValidationError);
  EXPECT_THROW(ordinal_loss(s, k + 1), ValidationError);
}

TEST(OrdinalLoss, DecodeCountsConfidentThresholds) {
  EXPECT_EQ(ordinal_decode(std::vector<double>{5, 5, 5, -5, -5}), 4);
  EXPECT_EQ(ordinal_decode(std::vector<double>{-1, -1}), 1);
  EXPECT_EQ(ordinal_decode(std::vector<double>{1, 1}), 3);
}

TEST(MhlOracleLoss, Examples) {
  const auto one = mhl_oracle_loss(std::vector<double>{2.5}, 2.0);
  const auto l2 = l2_log_loss(2.5, 2.0);
  EXPECT_EQ(one.value, l2.value);
  EXPECT_EQ(one.grad[0], l2.grad[0]);

  const auto exact = mhl_oracle_loss(std::vector<double>{2.0, 7.0}, 2.0);
  EXPECT_EQ(exact.value, 0.0);
  EXPECT_EQ(exact.grad, (std::vector<double>{0.0, 0.0}));

  const auto tie = mhl_oracle_loss(std::vector<double>{1.0, 3.0}, 2.0);
  EXPECT_EQ(tie.grad, (std::vector<double>{-2.0, 0.0}));
  EXPECT_THROW(mhl_oracle_loss(std::vector<double>{}, 1.0), ValidationError);
}

TEST(MhlOracleLoss, WinnerMatchesBruteForce) {
  Rng rng(9);
  for (int i = 0; i < 200; ++i) {
    const int m = 1 + static_cast<int>(rng.below(6));
    const auto p = random_vector(rng, m, 1.5);
    const double gt = rng.normal(0.0, 1.0);
    std::size_t best = 0;
    for (std::size_t j = 1; j < p.size(); ++j) {
      if (std::abs(p[j] - gt) < std::abs(p[best] - gt)) best = j;
    }
    const auto r = mhl_oracle_loss(p, gt);
    EXPECT_DOUBLE_EQ(r.value, (p[best] - gt) * (p[best] - gt));
    for (std::size_t j = 0; j < p.size(); ++j) {
      EXPECT_EQ(r.grad[j] != 0.0, j == best && p[best] != gt);
    }
  }
}

TEST(MhlOracleLoss, NonIncreasingForNestedSets) {
  Rng rng(10);
  for (int i = 0; i < 100; ++i) {
    const auto p = random_vector(rng, 8, 1.0);
    const double gt = rng.normal(0.0, 1.0);
    double prev = INFINITY;
    for (std::size_t m = 1; m <= p.size(); ++m) {
      const double v = mhl_oracle_loss(std::span<const double>(p.data(), m), gt).value;
      EXPECT_LE(v, prev);
      prev = v;
    }
  }
}

// Central differences with step 1e-4 on the raw outputs, 100+ instances each.
TEST(LossGradients, MatchFiniteDifferences) {
  Rng rng(77);
  const double h = 1e-4;
  const double tol = 1e-4;
  for (int i = 0; i < 120; ++i) {
    const int y = 1 + static_cast<int>(rng.below(64));
    const auto s = random_vector(rng, 64, 2.0);
    const auto qn = make_soft_target(kBins, y, rng.uniform(0.5, 6.0), TargetKind::normalized);
    const auto qu = make_soft_target(kBins, y, rng.uniform(0.5, 6.0), TargetKind::unnormalized);
    EXPECT_LT(relative_error(multiclass_loss(s, qn).grad,
                             numeric_grad([&](const auto& x) { return multiclass_loss(x, qn).value; }, s, h)),
              tol);
    EXPECT_LT(relative_error(binary_loss(s, qu).grad,
                             numeric_grad([&](const auto& x) { return binary_loss(x, qu).value; }, s, h)),
              tol);

    const std::vector<double> ord(s.begin(), s.end() - 1);
    EXPECT_LT(relative_error(ordinal_loss(ord, y).grad,
                             numeric_grad([&](const auto& x) { return ordinal_loss(x, y).value; }, ord, h)),
              tol);

    const double gt = rng.normal(1.5, 1.0);
    const std::vector<double> p1{rng.normal(1.5, 1.0)};
    EXPECT_LT(relative_error(l2_log_loss(p1[0], gt).grad,
                             numeric_grad([&](const auto& x) { return l2_log_loss(x[0], gt).value; }, p1, h)),
              tol);

    double c = rng.uniform(0.05, 1.0);
    while (std::abs(std::abs(p1[0] - gt) - c) < 10 * h) c *= 1.5;  // stay off the kink
    EXPECT_LT(relative_error(berhu_loss(p1[0], gt, c).grad,
                             numeric_grad([&](const auto& x) { return berhu_loss(x[0], gt, c).value; }, p1, h)),
              tol);

    const std::vector<double> g2{rng.normal(1.5, 1.0), rng.normal(0.0, 1.5)};
    EXPECT_LT(relative_error(gaussian_nll_loss(g2[0], g2[1], gt).grad,
                             numeric_grad([&](const auto& x) { return gaussian_nll_loss(x[0], x[1], gt).value; }, g2,
                                          h)),
              tol);

    auto heads = random_vector(rng, 4, 1.0);
    EXPECT_LT(relative_error(mhl_oracle_loss(heads, gt).grad,
                             numeric_grad([&](const auto& x) { return mhl_oracle_loss(x, gt).value; }, heads, h)),
              tol);
  }
}

TEST(LossProperty, LowerBounds) {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const auto s = random_vector(rng, 64, 3.0);
    const int y = 1 + static_cast<int>(rng.below(64));
    const auto qn = make_soft_target(kBins, y, 2.768, TargetKind::normalized);
    const auto qu = make_soft_target(kBins, y, 2.768, TargetKind::unnormalized);
    EXPECT_GE(binary_loss(s, qu).value, 0.0);
    EXPECT_GE(multiclass_loss(s, qn).value, entropy(DepthDistribution(qn.values)) - 1e-12);
  }
}

TEST(LossProperty, MulticlassStationaryAtTarget) {
  const auto q = make_soft_target(kBins, 12, 2.768, TargetKind::normalized);
  std::vector<double> s(64);
  for (int k = 0; k < 64; ++k) s[k] = std::log(q.values[k]);
  double norm = 0.0;
  for (double g : multiclass_loss(s, q).grad) norm += g * g;
  EXPECT_LT(std::sqrt(norm), 1e-8);
}
