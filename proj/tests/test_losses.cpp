#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "gradbal/errors.hpp"
#include "gradbal/losses.hpp"
#include "gradbal/rng.hpp"

using namespace gradbal;

namespace {

Tensor random_logits(std::size_t b, std::size_t k, Stream& s, double scale = 2.0) {
  Tensor t({b, k});
  for (double& v : t.values) v = scale * s.normal();
  return t;
}

std::vector<int> random_targets(std::size_t b, int k, Stream& s) {
  std::vector<int> y(b);
  for (int& v : y) v = static_cast<int>(s.below(static_cast<std::uint64_t>(k)));
  return y;
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

// d/dz of sum_i loss_i by central differences.
template <typename F>
void expect_logit_gradient(const Tensor& z, const Tensor& analytic, F total, double tol = 1e-7) {
  Tensor probe = z;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double h = 1e-5;
    probe[i] = z[i] + h;
    const double fp = total(probe);
    probe[i] = z[i] - h;
    const double fm = total(probe);
    probe[i] = z[i];
    EXPECT_NEAR(analytic[i], (fp - fm) / (2 * h), tol) << "logit " << i;
  }
}

double log_sigmoid(double z) { return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z)); }

}  // namespace

TEST(SoftmaxCe, ZeroLogitsGiveLogK) {
  const Tensor z({4, 3});
  const std::vector<int> y{0, 1, 2, 1};
  for (double l : softmax_ce(z, y).loss) EXPECT_NEAR(l, std::log(3.0), 1e-15);
}

TEST(SoftmaxCe, SaturatesAtLargeMargin) {
  Tensor z({1, 3});
  z[1] = 20.0;
  const std::vector<int> y{1};
  EXPECT_LT(softmax_ce(z, y).loss[0], 1e-6);
}

TEST(SoftmaxCe, ShiftInvariant) {
  Stream s(1, "t");
  const Tensor z = random_logits(8, 3, s);
  Tensor shifted = z;
  for (double& v : shifted.values) v += 5.0;
  const auto y = random_targets(8, 3, s);
  const auto a = softmax_ce(z, y), b = softmax_ce(shifted, y);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(a.loss[i], b.loss[i], 1e-12);
}

TEST(SoftmaxCe, StableForHugeLogits) {
  Tensor z({1, 3});
  z[0] = 1e4;
  z[1] = -1e4;
  const std::vector<int> y{1};
  const auto l = softmax_ce(z, y);
  EXPECT_NEAR(l.loss[0], 2e4, 1e-6);
  EXPECT_TRUE(l.d_logits.all_finite());
}

TEST(SoftmaxCe, GradientMatchesFiniteDifferences) {
  Stream s(2, "t");
  const Tensor z = random_logits(5, 3, s);
  const auto y = random_targets(5, 3, s);
  expect_logit_gradient(z, softmax_ce(z, y).d_logits, [&](const Tensor& t) { return sum(softmax_ce(t, y).loss); });
}

TEST(SoftmaxCe, Errors) {
  const Tensor z({2, 3});
  const std::vector<int> bad{0, 3}, neg{-1, 0}, short_y{0};
  EXPECT_THROW(softmax_ce(z, bad), LabelError);
  EXPECT_THROW(softmax_ce(z, neg), LabelError);
  EXPECT_THROW(softmax_ce(z, short_y), ConfigError);
  Tensor nan = z;
  nan[0] = std::nan("");
  const std::vector<int> ok{0, 1};
  EXPECT_THROW(softmax_ce(nan, ok), NumericFault);
}

TEST(WeightedCe, NoiseCountsGiveInverseFrequencyWeights) {
  const auto w = weighted_ce_weights({426, 60, 46});
  EXPECT_NEAR(w[0], 0.4163, 5e-5);
  EXPECT_NEAR(w[1], 2.9556, 5e-5);
  EXPECT_NEAR(w[2], 3.8551, 5e-5);
}

TEST(WeightedCe, BalancedAndMissingClasses) {
  const auto w = weighted_ce_weights({7, 7, 7});
  for (double v : w) EXPECT_DOUBLE_EQ(v, 1.0);
  const auto z = weighted_ce_weights({5, 5, 0});
  EXPECT_EQ(z[2], 0.0);
  EXPECT_DOUBLE_EQ(z[0], 10.0 / 15.0);
  EXPECT_THROW(weighted_ce_weights({0, 0, 0}), ArgumentError);
}

TEST(WeightedCe, ScalesCeByTargetWeight) {
  Stream s(3, "t");
  const Tensor z = random_logits(6, 3, s);
  const auto y = random_targets(6, 3, s);
  const std::array<double, 3> w{0.5, 2.0, 3.5};
  const auto ce = softmax_ce(z, y), wce = weighted_ce(z, y, w);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(wce.loss[i], w[y[i]] * ce.loss[i], 1e-14);
  expect_logit_gradient(z, wce.d_logits, [&](const Tensor& t) { return sum(weighted_ce(t, y, w).loss); });
}

TEST(Focal, GammaZeroIsCe) {
  Stream s(4, "t");
  const Tensor z = random_logits(16, 3, s);
  const auto y = random_targets(16, 3, s);
  const auto a = focal_loss(z, y, 0.0), b = softmax_ce(z, y);
  for (std::size_t i = 0; i < 16; ++i) EXPECT_NEAR(a.loss[i], b.loss[i], 1e-12);
  for (std::size_t i = 0; i < a.d_logits.size(); ++i) EXPECT_NEAR(a.d_logits[i], b.d_logits[i], 1e-12);
}

TEST(Focal, UniformProbabilities) {
  const Tensor z({1, 3});
  const std::vector<int> y{2};
  EXPECT_NEAR(focal_loss(z, y, 2.0).loss[0], (4.0 / 9.0) * std::log(3.0), 1e-12);
  EXPECT_NEAR(focal_loss(z, y, 2.0).loss[0], 0.4883, 5e-5);
}

TEST(Focal, SaturatesAtLargeMargin) {
  Tensor z({1, 3});
  z[0] = 20.0;
  const std::vector<int> y{0};
  const auto l = focal_loss(z, y, 2.0);
  EXPECT_LT(l.loss[0], 1e-8);
  EXPECT_TRUE(l.d_logits.all_finite());
}

TEST(Focal, MatchesDirectFormulaAndGradient) {
  Stream s(5, "t");
  for (const double gamma : {0.5, 1.0, 2.0, 3.7}) {
    const Tensor z = random_logits(6, 3, s);
    const auto y = random_targets(6, 3, s);
    const auto f = focal_loss(z, y, gamma);
    for (std::size_t i = 0; i < 6; ++i) {
      double denom = 0.0;
      for (std::size_t k = 0; k < 3; ++k) denom += std::exp(z[i * 3 + k]);
      const double p = std::exp(z[i * 3 + static_cast<std::size_t>(y[i])]) / denom;
      EXPECT_NEAR(f.loss[i], -std::pow(1 - p, gamma) * std::log(p), 1e-12);
    }
    expect_logit_gradient(z, f.d_logits, [&](const Tensor& t) { return sum(focal_loss(t, y, gamma).loss); });
  }
}

TEST(Focal, NegativeGammaRejected) {
  const Tensor z({1, 3});
  const std::vector<int> y{0};
  EXPECT_THROW(focal_loss(z, y, -1.0), ConfigError);
}

TEST(Corn, ZeroLogitsTargetZero) {
  const Tensor z({1, 2});
  const std::vector<int> y{0};
  const auto l = ordinal_corn(z, y);
  EXPECT_NEAR(l.loss[0], std::log(2.0), 1e-15);
  EXPECT_EQ(l.d_logits[1], 0.0);
  EXPECT_EQ(l.normalizer, 1.0);
}

TEST(Corn, MatchesSubsetFormula) {
  Stream s(6, "t");
  const Tensor z = random_logits(20, 2, s);
  const auto y = random_targets(20, 3, s);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < 20; ++i) {
      if (static_cast<std::size_t>(y[i]) < k) continue;
      const double zk = z[i * 2 + k];
      const bool positive = static_cast<std::size_t>(y[i]) >= k + 1;
      num += -(positive ? log_sigmoid(zk) : log_sigmoid(-zk));
      den += 1.0;
    }
  EXPECT_NEAR(ordinal_corn_loss(z, y), num / den, 1e-12);
  const auto per = ordinal_corn(z, y);
  expect_logit_gradient(z, per.d_logits, [&](const Tensor& t) { return sum(ordinal_corn(t, y).loss); });
}

TEST(Corn, TwoClassCaseIsBinaryCe) {
  Stream s(7, "t");
  const Tensor z = random_logits(10, 1, s);
  const auto y = random_targets(10, 2, s);
  const auto l = ordinal_corn(z, y);
  for (std::size_t i = 0; i < 10; ++i) {
    const double bce = y[i] == 1 ? -log_sigmoid(z[i]) : -log_sigmoid(-z[i]);
    EXPECT_NEAR(l.loss[i], bce, 1e-12);
  }
}

TEST(Corn, PredictSaturation) {
  Tensor z({3, 2});
  z[0] = 20;
  z[1] = 20;
  z[2] = -20;
  z[3] = 20;
  z[4] = 20;
  z[5] = -20;
  EXPECT_EQ(ordinal_predict(z), (std::vector<int>{2, 0, 1}));
}

TEST(Corn, PredictMonotoneInEachThreshold) {
  Stream s(8, "t");
  for (int trial = 0; trial < 2000; ++trial) {
    Tensor z = random_logits(1, 2, s, 3.0);
    const int before = ordinal_predict(z)[0];
    z[s.below(2)] += s.uniform(0.0, 5.0);
    EXPECT_GE(ordinal_predict(z)[0], before);
  }
}

TEST(Corn, RejectsBadShapes) {
  const Tensor z({2, 0});
  const std::vector<int> y{0, 1};
  EXPECT_THROW(ordinal_corn(z, y), ConfigError);
  const Tensor z2({2, 2});
  const std::vector<int> y3{0, 3};
  EXPECT_THROW(ordinal_corn(z2, y3), LabelError);
}

TEST(AxisLoss, ZeroPerfectAndMean) {
  const Tensor z({3, 3});
  const std::vector<int> y{0, 1, 2};
  EXPECT_NEAR(axis_loss(z, y).value, std::log(3.0), 1e-15);
  Tensor perfect({3, 3});
  for (int i = 0; i < 3; ++i) perfect[static_cast<std::size_t>(i * 3 + y[i])] = 20.0;
  EXPECT_LT(axis_loss(perfect, y).value, 1e-6);
  Stream s(9, "t");
  const Tensor r = random_logits(7, 3, s);
  const auto yr = random_targets(7, 3, s);
  EXPECT_NEAR(axis_loss(r, yr).value, sum(softmax_ce(r, yr).loss) / 7.0, 1e-12);
}

TEST(AllVariants, LossesNonNegative) {
  Stream s(10, "t");
  for (int trial = 0; trial < 10000; ++trial) {
    const Tensor z = random_logits(1, 3, s, 5.0);
    const auto y = random_targets(1, 3, s);
    EXPECT_GE(softmax_ce(z, y).loss[0], 0.0);
    EXPECT_GE(focal_loss(z, y, 2.0).loss[0], 0.0);
    EXPECT_GE(weighted_ce(z, y, {0.3, 1.0, 4.0}).loss[0], 0.0);
    const Tensor t = random_logits(1, 2, s, 5.0);
    EXPECT_GE(ordinal_corn(t, y).loss[0], 0.0);
  }
}

TEST(PerClass, SpecExamples) {
  const std::vector<double> l{1.0, 3.0};
  const std::vector<int> y{0, 0};
  const ClassLoss c = per_class_losses(l, y);
  EXPECT_EQ(c.loss[0], 2.0);
  EXPECT_TRUE(c.present[0]);
  EXPECT_FALSE(c.present[1]);
  EXPECT_FALSE(c.present[2]);
  EXPECT_EQ(c.count[1], 0U);

  const std::vector<double> abc{0.3, 1.7, 2.9};
  const std::vector<int> y3{0, 1, 2};
  const ClassLoss d = per_class_losses(abc, y3);
  EXPECT_EQ(d.loss, (std::array<double, 3>{0.3, 1.7, 2.9}));
}

TEST(PerClass, CountWeightedMeanEqualsBatchMean) {
  Stream s(11, "t");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t b = 1 + s.below(12);
    std::vector<double> l(b);
    for (double& v : l) v = s.uniform(0, 3);
    const auto y = random_targets(b, 3, s);
    const ClassLoss c = per_class_losses(l, y);
    double weighted = 0.0;
    for (std::size_t k = 0; k < 3; ++k) weighted += static_cast<double>(c.count[k]) * c.loss[k];
    EXPECT_NEAR(weighted / static_cast<double>(b), sum(l) / static_cast<double>(b), 1e-12);
  }
}

TEST(PerClass, SumReductionAndClassGradients) {
  Stream s(12, "t");
  const Tensor z = random_logits(6, 3, s);
  const std::vector<int> y{0, 0, 1, 2, 2, 2};
  const SampleLosses l = softmax_ce(z, y);
  const ClassLoss sum_c = per_class_losses(l, y, ClassReduction::sum);
  const ClassLoss mean_c = per_class_losses(l, y, ClassReduction::mean);
  EXPECT_NEAR(sum_c.loss[2], l.loss[3] + l.loss[4] + l.loss[5], 1e-14);
  EXPECT_NEAR(mean_c.loss[2], sum_c.loss[2] / 3.0, 1e-14);
  // Class-c gradient touches only class-c rows and is the mean gradient.
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 3; ++k) {
      const auto c = static_cast<std::size_t>(y[i]);
      for (std::size_t cc = 0; cc < 3; ++cc) {
        const double expected = cc == c ? l.d_logits[i * 3 + k] / static_cast<double>(mean_c.count[c]) : 0.0;
        EXPECT_NEAR(mean_c.d_logits[cc][i * 3 + k], expected, 1e-15);
      }
    }
}

TEST(PerClass, Errors) {
  const std::vector<double> none;
  const std::vector<int> no_y;
  EXPECT_THROW(per_class_losses(none, no_y), EmptyBatch);
  const std::vector<double> one{1.0};
  const std::vector<int> two{0, 1};
  EXPECT_THROW(per_class_losses(one, two), ConfigError);
  const std::vector<int> bad{5};
  EXPECT_THROW(per_class_losses(one, bad), LabelError);
}

TEST(Variant, ParseTagAndValidate) {
  for (const char* tag : {"ce", "weighted_ce", "focal", "ordinal"}) EXPECT_EQ(LossVariant::parse(tag).tag(), tag);
  EXPECT_THROW(LossVariant::parse("hinge"), ConfigError);
  LossVariant v = LossVariant::parse("focal");
  v.gamma = -0.5;
  EXPECT_THROW(v.validate(), ConfigError);
  v = LossVariant::parse("weighted_ce");
  v.class_weights = {1.0, 0.0, 1.0};
  EXPECT_THROW(v.validate(), ConfigError);
}

TEST(BatchObjective, MeanOfSampleLosses) {
  Stream s(13, "t");
  const Tensor z = random_logits(5, 3, s);
  const auto y = random_targets(5, 3, s);
  const SampleLosses l = softmax_ce(z, y);
  const ScalarLoss m = batch_objective(l);
  EXPECT_NEAR(m.value, sum(l.loss) / 5.0, 1e-15);
  for (std::size_t i = 0; i < l.d_logits.size(); ++i) EXPECT_NEAR(m.d_logits[i], l.d_logits[i] / 5.0, 1e-16);
}
