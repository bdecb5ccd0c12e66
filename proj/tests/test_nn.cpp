#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <vector>

#include "gradbal/errors.hpp"
#include "gradbal/gradcheck.hpp"
#include "gradbal/losses.hpp"
#include "gradbal/nn.hpp"
#include "gradbal/rng.hpp"

using namespace gradbal;

namespace {

Tensor random_batch(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
  Tensor t({n, 1, h, w});
  Stream s(seed, "test.batch");
  for (double& v : t.values) v = s.normal();
  return t;
}

ModelConfig small_config(bool dft, std::uint64_t seed = 1) {
  ModelConfig c = tiny_model_config(dft);
  c.seed = seed;
  return c;
}

void randomize_biases(ParamStore& p, std::uint64_t seed) {
  Stream s(seed, "test.bias");
  for (std::size_t i = 0; i < p.size(); ++i)
    if (p[i].value.rank() == 1)
      for (double& v : p.mutable_value(i).values) v = s.uniform(-0.1, 0.1);
}

// Linear functional of both logit blocks with fixed random coefficients.
struct LinearProbe {
  Tensor r_sev, r_axis;

  double value(const ForwardTape& t) const {
    double v = 0.0;
    for (std::size_t i = 0; i < r_sev.size(); ++i) v += r_sev[i] * t.severity_logits()[i];
    for (std::size_t i = 0; i < r_axis.size(); ++i) v += r_axis[i] * t.axis_logits()[i];
    return v;
  }
  Objective objective(const ForwardTape& t) const {
    Objective o = t.severity_objective(0.0, r_sev);
    o.add_scaled(t.axis_objective(0.0, r_axis), 1.0);
    o.value = value(t);
    return o;
  }
};

LinearProbe make_probe(const ForwardTape& t, std::uint64_t seed) {
  Stream s(seed, "test.probe");
  LinearProbe p{Tensor(t.severity_logits().shape), Tensor(t.axis_logits().shape)};
  for (double& v : p.r_sev.values) v = s.normal();
  for (double& v : p.r_axis.values) v = s.normal();
  return p;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace

TEST(Init, DeterministicForSameSeed) {
  const auto a = init_model(small_config(true, 5));
  const auto b = init_model(small_config(true, 5));
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].value, b[i].value) << a[i].name;
}

TEST(Init, DifferentSeedChangesWeights) {
  const auto a = init_model(small_config(false, 5));
  const auto b = init_model(small_config(false, 6));
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs = differs || a[i].value != b[i].value;
  EXPECT_TRUE(differs);
}

TEST(Init, BiasesZeroWeightsWithinGlorotLimit) {
  const ModelConfig c = small_config(true);
  const auto p = init_model(c);
  for (const auto& param : p.params()) {
    if (param.value.rank() == 1) {
      for (double v : param.value.values) EXPECT_EQ(v, 0.0) << param.name;
      continue;
    }
    std::size_t fan_out = param.value.dim(0);
    const std::size_t fan_in = param.value.size() / fan_out;
    if (param.value.rank() == 4) fan_out *= 9;
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double v : param.value.values) EXPECT_LE(std::abs(v), limit) << param.name;
  }
}

TEST(Init, OnlySeverityHeadIsClassificationHead) {
  const auto p = init_model(small_config(true));
  std::set<std::string> names;
  for (const auto& param : p.params()) {
    EXPECT_TRUE(names.insert(param.name).second) << "duplicate " << param.name;
    EXPECT_EQ(param.classification_head, param.name == "severity.w" || param.name == "severity.b")
        << param.name;
  }
  const ModelConfig c = small_config(true);
  EXPECT_EQ(p.head_size(), 3 * c.feature_width() + 3);
}

TEST(Init, RejectsInvalidConfig) {
  ModelConfig c = small_config(false);
  c.height = 2;
  EXPECT_THROW(init_model(c), ConfigError);
  c = small_config(false);
  c.trunk_width = 0;
  EXPECT_THROW(init_model(c), ConfigError);
  c = small_config(false);
  c.severity_classes = 4;
  EXPECT_THROW(init_model(c), ConfigError);
}

TEST(Forward, LogitShapes) {
  ModelConfig c;
  c.seed = 3;
  const auto p = init_model(c);
  const ForwardTape t = forward(p, random_batch(4, 28, 28, 1));
  EXPECT_EQ(t.severity_logits().shape, (std::vector<std::size_t>{4, 3}));
  EXPECT_EQ(t.axis_logits().shape, (std::vector<std::size_t>{4, 3}));
  EXPECT_EQ(t.features().shape, (std::vector<std::size_t>{4, c.trunk_width}));
}

TEST(Forward, DftFusionWidensFeaturesAndOrdinalNarrowsHead) {
  ModelConfig c = small_config(true);
  c.ordinal = true;
  const auto p = init_model(c);
  const ForwardTape t = forward(p, random_batch(5, 8, 8, 2));
  EXPECT_EQ(t.features().dim(1), c.trunk_width + c.trunk_width / 2);
  EXPECT_EQ(t.severity_logits().shape, (std::vector<std::size_t>{5, 2}));
  EXPECT_EQ(t.axis_logits().shape, (std::vector<std::size_t>{5, 3}));
}

TEST(Forward, ZeroParametersGiveUniformSoftmax) {
  auto p = init_model(small_config(true));
  for (std::size_t i = 0; i < p.size(); ++i) p.mutable_value(i).fill(0.0);
  const ForwardTape t = forward(p, random_batch(3, 8, 8, 4));
  for (double v : t.severity_logits().values) EXPECT_EQ(v, 0.0);
  const std::vector<int> targets{0, 1, 2};
  for (double l : softmax_ce(t.severity_logits(), targets).loss) EXPECT_NEAR(l, std::log(3.0), 1e-15);
}

TEST(Forward, PermutingSamplesPermutesRows) {
  const auto p = init_model(small_config(true, 8));
  const Tensor x = random_batch(4, 8, 8, 9);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  Tensor y(x.shape);
  const std::size_t plane = 64;
  for (std::size_t n = 0; n < 4; ++n)
    std::copy_n(x.values.begin() + static_cast<std::ptrdiff_t>(perm[n] * plane), plane,
                y.values.begin() + static_cast<std::ptrdiff_t>(n * plane));
  const ForwardTape a = forward(p, x), b = forward(p, y);
  for (std::size_t n = 0; n < 4; ++n)
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_EQ(b.severity_logits()[n * 3 + k], a.severity_logits()[perm[n] * 3 + k]);
      EXPECT_EQ(b.axis_logits()[n * 3 + k], a.axis_logits()[perm[n] * 3 + k]);
    }
}

TEST(Forward, BitIdenticalOnRepeat) {
  const auto p = init_model(small_config(true, 10));
  const Tensor x = random_batch(6, 8, 8, 11);
  const ForwardTape a = forward(p, x), b = forward(p, x);
  EXPECT_EQ(a.severity_logits(), b.severity_logits());
  EXPECT_EQ(a.axis_logits(), b.axis_logits());
  EXPECT_NE(a.id(), b.id());
}

TEST(Forward, RejectsWrongShape) {
  const auto p = init_model(small_config(false));
  EXPECT_THROW(forward(p, random_batch(2, 9, 8, 0)), ConfigError);
  EXPECT_THROW(forward(p, Tensor({2, 2, 8, 8})), ConfigError);
}

TEST(Forward, NonFiniteInputNamesLayer) {
  const auto p = init_model(small_config(false));
  Tensor x = random_batch(2, 8, 8, 0);
  x[5] = std::nan("");
  try {
    forward(p, x);
    FAIL() << "expected NumericFault";
  } catch (const NumericFault& e) {
    EXPECT_FALSE(e.layer().empty());
  }
}

TEST(Backward, ZeroUpstreamLeavesGradientsZero) {
  auto p = init_model(small_config(true, 12));
  const ForwardTape t = forward(p, random_batch(3, 8, 8, 12));
  p.zero_grad();
  backward_total(t, make_probe(t, 1).objective(t), 0.0, p);
  for (double g : p.flat_grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, IsLinearInUpstream) {
  auto p = init_model(small_config(true, 13));
  randomize_biases(p, 13);
  const ForwardTape t = forward(p, random_batch(3, 8, 8, 13));
  const Objective o = make_probe(t, 2).objective(t);
  p.zero_grad();
  backward_total(t, o, 1.0, p);
  const auto g1 = p.flat_grad();
  p.zero_grad();
  backward_total(t, o, 2.0, p);
  const auto g2 = p.flat_grad();
  p.zero_grad();
  backward_total(t, o, 0.37, p);
  const auto g3 = p.flat_grad();
  for (std::size_t i = 0; i < g1.size(); ++i) {
    EXPECT_EQ(g2[i], 2.0 * g1[i]);
    EXPECT_LE(std::abs(g3[i] - 0.37 * g1[i]), 1e-12 * std::max(1.0, std::abs(g3[i])));
  }
}

TEST(Backward, AccumulatesAcrossCalls) {
  auto p = init_model(small_config(false, 14));
  const ForwardTape t = forward(p, random_batch(2, 8, 8, 14));
  const Objective o = make_probe(t, 3).objective(t);
  p.zero_grad();
  backward_total(t, o, 1.0, p);
  const auto once = p.flat_grad();
  backward_total(t, o, 1.0, p);
  const auto twice = p.flat_grad();
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(twice[i], 2.0 * once[i]);
}

// Central differences of a linear functional of the logits, written
// independently of the library's gradient checker.
TEST(Backward, MatchesFiniteDifferences) {
  for (const bool dft : {false, true}) {
    auto p = init_model(small_config(dft, 20));
    randomize_biases(p, 20);
    const Tensor x = random_batch(3, 8, 8, 21);
    const ForwardTape base = forward(p, x);
    const LinearProbe probe = make_probe(base, 4);
    p.zero_grad();
    backward_total(base, probe.objective(base), 1.0, p);
    const auto sig = base.activation_signature();
    std::size_t checked = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      for (std::size_t j = 0; j < p[i].value.size(); ++j) {
        const double orig = p[i].value[j];
        const double h = 1e-6;
        p.mutable_value(i)[j] = orig + h;
        const ForwardTape tp = forward(p, x);
        p.mutable_value(i)[j] = orig - h;
        const ForwardTape tm = forward(p, x);
        p.mutable_value(i)[j] = orig;
        if (tp.activation_signature() != sig || tm.activation_signature() != sig) continue;
        const double numeric = (probe.value(tp) - probe.value(tm)) / (2 * h);
        EXPECT_LT(rel_err(p[i].grad[j], numeric), 1e-4) << p[i].name << "[" << j << "]";
        ++checked;
      }
    }
    EXPECT_GT(checked, p.num_values() * 9 / 10);
  }
}

TEST(Backward, StaleTapeIsRejected) {
  auto p = init_model(small_config(false, 15));
  const ForwardTape t = forward(p, random_batch(2, 8, 8, 15));
  const Objective o = make_probe(t, 5).objective(t);
  p.mutable_value(0)[0] += 1e-3;
  p.zero_grad();
  EXPECT_THROW(backward_total(t, o, 1.0, p), StaleTape);
  EXPECT_THROW(head_grad(t, o, p), StaleTape);
}

TEST(Backward, ForeignObjectiveIsRejected) {
  auto p = init_model(small_config(false, 16));
  const Tensor x = random_batch(2, 8, 8, 16);
  const ForwardTape a = forward(p, x), b = forward(p, x);
  const Objective ob = make_probe(b, 6).objective(b);
  EXPECT_THROW(backward_total(a, ob, 1.0, p), InvalidHandle);
  EXPECT_THROW(head_grad(a, ob, p), InvalidHandle);
  Objective oa = a.zero_objective();
  EXPECT_THROW(oa.add_scaled(ob, 1.0), InvalidHandle);
}

TEST(Backward, OtherStoreIsRejected) {
  auto p = init_model(small_config(false, 17));
  auto q = init_model(small_config(false, 17));
  const ForwardTape t = forward(p, random_batch(2, 8, 8, 17));
  EXPECT_THROW(backward_total(t, t.zero_objective(), 1.0, q), StaleTape);
}

TEST(HeadGrad, UniformSingleSampleBiasGradient) {
  auto p = init_model(small_config(false));
  for (std::size_t i = 0; i < p.size(); ++i) p.mutable_value(i).fill(0.0);
  const ForwardTape t = forward(p, random_batch(1, 8, 8, 3));
  const std::vector<int> y{0};
  const SampleLosses l = softmax_ce(t.severity_logits(), y);
  const auto g = head_grad(t, t.severity_objective(l.loss[0], l.d_logits), p);
  const std::size_t nw = p[p.index_of("severity.w")].value.size();
  ASSERT_EQ(g.size(), nw + 3);
  // Zero trunk features: weight gradient vanishes, bias gradient is p - onehot.
  for (std::size_t k = 0; k < nw; ++k) EXPECT_EQ(g[k], 0.0);
  EXPECT_NEAR(g[nw + 0], -2.0 / 3.0, 1e-15);
  EXPECT_NEAR(g[nw + 1], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(g[nw + 2], 1.0 / 3.0, 1e-15);
}

TEST(HeadGrad, MatchesFiniteDifferencesOverHead) {
  auto p = init_model(small_config(true, 30));
  randomize_biases(p, 30);
  const Tensor x = random_batch(4, 8, 8, 31);
  const std::vector<int> y{0, 2, 1, 2};
  const ForwardTape base = forward(p, x);
  const SampleLosses l = softmax_ce(base.severity_logits(), y);
  const ScalarLoss mean = batch_objective(l);
  const auto g = head_grad(base, base.severity_objective(mean.value, mean.d_logits), p);
  std::size_t offset = 0;
  for (const char* name : {"severity.w", "severity.b"}) {
    const std::size_t i = p.index_of(name);
    for (std::size_t j = 0; j < p[i].value.size(); ++j) {
      const double orig = p[i].value[j];
      const double h = 1e-5;
      p.mutable_value(i)[j] = orig + h;
      const double fp = batch_objective(softmax_ce(forward(p, x).severity_logits(), y)).value;
      p.mutable_value(i)[j] = orig - h;
      const double fm = batch_objective(softmax_ce(forward(p, x).severity_logits(), y)).value;
      p.mutable_value(i)[j] = orig;
      EXPECT_LT(rel_err(g[offset + j], (fp - fm) / (2 * h)), 1e-4) << name << "[" << j << "]";
    }
    offset += p[i].value.size();
  }
}

TEST(HeadGrad, LeavesMainGradientsBitIdentical) {
  auto p = init_model(small_config(true, 40));
  randomize_biases(p, 40);
  const ForwardTape t = forward(p, random_batch(4, 8, 8, 41));
  const Objective o = make_probe(t, 7).objective(t);
  p.zero_grad();
  backward_total(t, o, 1.0, p);
  const auto reference = p.flat_grad();

  p.zero_grad();
  for (int c = 0; c < 3; ++c) {
    Tensor d(t.severity_logits().shape);
    d[static_cast<std::size_t>(c)] = 1.0;
    head_grad(t, t.severity_objective(0.0, d), p);
  }
  for (double g : p.flat_grad()) EXPECT_EQ(g, 0.0);
  backward_total(t, o, 1.0, p);
  EXPECT_EQ(p.flat_grad(), reference);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParamStore p;
  p.add("x", {1}, false);
  p.add("y", {1}, false);
  p.mutable_value(0)[0] = 0.5;
  p.grad(0)[0] = 1.0;
  p.grad(1)[0] = -1.0;
  AdamState s = AdamState::zeros_like(p);
  adam_step(p, s, 0.1);
  EXPECT_NEAR(p[0].value[0], 0.4, 1e-6);
  EXPECT_NEAR(p[1].value[0], 0.1, 1e-6);
  EXPECT_NEAR(p[0].value[0] - 0.5, -(p[1].value[0] - 0.0), 1e-15);
  EXPECT_EQ(s.step, 1U);
}

TEST(Adam, ZeroGradientLeavesParameter) {
  ParamStore p;
  p.add("x", {3}, false);
  p.mutable_value(0).fill(0.25);
  AdamState s = AdamState::zeros_like(p);
  adam_step(p, s, 0.1);
  adam_step(p, s, 0.1);
  for (double v : p[0].value.values) EXPECT_EQ(v, 0.25);
  EXPECT_EQ(s.step, 2U);
}

TEST(Adam, ShapeMismatchIsConfigError) {
  ParamStore p;
  p.add("x", {3}, false);
  AdamState s = AdamState::zeros_like(p);
  s.first_moment[0] = Tensor({2});
  EXPECT_THROW(adam_step(p, s, 0.1), ConfigError);
  AdamState empty;
  EXPECT_THROW(adam_step(p, empty, 0.1), ConfigError);
}

TEST(Cosine, Endpoints) {
  EXPECT_DOUBLE_EQ(cosine_lr(0, 100, 1e-3, 1e-5), 1e-3);
  EXPECT_NEAR(cosine_lr(100, 100, 1e-3, 1e-5), 1e-5, 1e-18);
  EXPECT_NEAR(cosine_lr(50, 100, 1e-3, 1e-5), (1e-3 + 1e-5) / 2, 1e-18);
}

TEST(Cosine, MonotoneNonIncreasing) {
  double prev = cosine_lr(0, 37, 1.0, 0.0);
  for (int s = 1; s <= 37; ++s) {
    const double lr = cosine_lr(s, 37, 1.0, 0.0);
    EXPECT_LE(lr, prev);
    prev = lr;
  }
}

TEST(Cosine, RangeErrors) {
  EXPECT_THROW(cosine_lr(-1, 10, 1.0, 0.0), ArgumentError);
  EXPECT_THROW(cosine_lr(11, 10, 1.0, 0.0), ArgumentError);
  EXPECT_THROW(cosine_lr(0, 0, 1.0, 0.0), ArgumentError);
}

namespace {

// O(N^4) direct double sum.
std::vector<std::complex<double>> naive_dft(const std::vector<double>& x, std::size_t h, std::size_t w) {
  std::vector<std::complex<double>> out(h * w);
  for (std::size_t u = 0; u < h; ++u)
    for (std::size_t v = 0; v < w; ++v) {
      std::complex<double> acc = 0.0;
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          const double a = -2 * std::numbers::pi *
                           (static_cast<double>(u * y) / static_cast<double>(h) +
                            static_cast<double>(v * xx) / static_cast<double>(w));
          acc += x[y * w + xx] * std::complex<double>(std::cos(a), std::sin(a));
        }
      out[u * w + v] = acc;
    }
  return out;
}

}  // namespace

TEST(Dft, MatchesDirectDoubleSum) {
  Stream s(1, "test.dft");
  for (const auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {6, 10}, {7, 5}}) {
    std::vector<double> x(h * w);
    for (double& v : x) v = s.normal();
    const auto fast = dft2(x, h, w);
    const auto slow = naive_dft(x, h, w);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LT(std::abs(fast[i] - slow[i]), 1e-10);
  }
}

TEST(Dft, ConstantImageIsExactlyDcOnly) {
  for (const double c : {1.0, -0.37, 123.456}) {
    const std::vector<double> x(28 * 28, c);
    const auto f = dft2(x, 28, 28);
    EXPECT_EQ(std::abs(f[0]), std::abs(c) * 784.0);
    for (std::size_t i = 1; i < f.size(); ++i) EXPECT_EQ(std::abs(f[i]), 0.0);
  }
}

TEST(Dft, ParsevalOnRandomImages) {
  Stream s(2, "test.parseval");
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> x(28 * 28);
    for (double& v : x) v = s.normal();
    double energy = 0.0, spectral = 0.0;
    for (double v : x) energy += v * v;
    for (const auto& f : dft2(x, 28, 28)) spectral += std::norm(f);
    EXPECT_LT(std::abs(spectral - 28.0 * 28.0 * energy) / (28.0 * 28.0 * energy), 1e-6);
  }
}

TEST(Dft, SinusoidOccupiesTwoBins) {
  constexpr std::size_t n = 16, k = 3;
  std::vector<double> x(n * n);
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t c = 0; c < n; ++c)
      x[y * n + c] = std::cos(2 * std::numbers::pi * static_cast<double>(k * y) / n);
  const auto f = dft2(x, n, n);
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = 0; v < n; ++v) {
      const double mag = std::abs(f[u * n + v]);
      if (v == 0 && (u == k || u == n - k))
        EXPECT_NEAR(mag, n * n / 2.0, 1e-9);
      else
        EXPECT_LT(mag, 1e-9) << u << "," << v;
    }
}

TEST(Dft, FeaturesAreLogMagnitude) {
  Stream s(3, "test.feat");
  std::vector<double> x(8 * 8);
  for (double& v : x) v = s.normal();
  const auto f = dft2(x, 8, 8);
  const auto feat = dft_features(x, 8, 8);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(feat[i], std::log1p(std::abs(f[i])));
}

TEST(Dft, RejectsBadInput) {
  std::vector<double> x(10, 1.0);
  EXPECT_THROW(dft2(x, 3, 3), ConfigError);
  x[2] = INFINITY;
  EXPECT_THROW(dft2(x, 2, 5), NumericFault);
}

TEST(GradCheck, AllVariantsPassOnOneSeed) {
  for (const char* tag : {"ce", "weighted_ce", "focal", "ordinal"}) {
    const auto r = finite_diff_check(tiny_model_config(), LossVariant::parse(tag), 3);
    EXPECT_LT(r.max_rel_error, 1e-4) << tag;
    EXPECT_GT(r.checked, 0U);
  }
}

TEST(GradCheck, StepOutsideRangeThrows) {
  EXPECT_THROW(finite_diff_check(tiny_model_config(), LossVariant{}, 0, 1e-7), ArgumentError);
  EXPECT_THROW(finite_diff_check(tiny_model_config(), LossVariant{}, 0, 0.5), ArgumentError);
}
