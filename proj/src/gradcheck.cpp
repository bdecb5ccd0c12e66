#include "gradbal/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gradbal/errors.hpp"
#include "gradbal/reweight.hpp"
#include "gradbal/rng.hpp"

namespace gradbal {
namespace {

constexpr std::size_t kBatch = 6;
constexpr int kMaxStepShrinks = 3;

struct Probe {
  double value;
  std::vector<std::uint8_t> signature;
};

}  // namespace

ModelConfig tiny_model_config(bool dft_fusion) {
  ModelConfig c;
  c.height = 8;
  c.width = 8;
  c.conv1_channels = 2;
  c.conv2_channels = 3;
  c.trunk_width = 6;
  c.dft_fusion = dft_fusion;
  return c;
}

GradCheckResult finite_diff_check(const ModelConfig& config, const LossVariant& variant,
                                  std::uint64_t seed, double eps) {
  if (!(eps >= 1e-5 && eps <= 1e-2)) throw ArgumentError("gradcheck step must be in [1e-5, 1e-2]");
  ModelConfig cfg = config;
  cfg.ordinal = variant.kind == LossKind::ordinal;
  cfg.seed = derive_key(seed, "init");
  ParamStore params = init_model(cfg);

  // Random biases so no unit sits exactly at a ReLU kink.
  Stream rng(seed, "gradcheck");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i].value.rank() == 1)
      for (double& v : params.mutable_value(i).values) v = rng.uniform(-0.1, 0.1);

  Tensor batch({kBatch, 1, cfg.height, cfg.width});
  for (double& v : batch.values) v = rng.normal();
  std::vector<int> sev(kBatch), axis(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) {
    sev[i] = static_cast<int>(i % 3);
    axis[i] = static_cast<int>(rng.below(3));
  }
  LossVariant v = variant;
  // Unit weights would reduce the check to plain CE.
  if (v.kind == LossKind::weighted_ce && v.class_weights == std::array<double, 3>{1.0, 1.0, 1.0})
    v.class_weights = {0.5, 2.0, 3.5};

  GradCheckResult result;
  for (const bool reweight : {true, false}) {
    StepOptions options{v, reweight, ClassReduction::mean};
    const ForwardTape base = forward(params, batch);
    const StepLoss step = step_objective(base, params, sev, axis, options);
    const AlphaWeights alphas = step.alphas;
    params.zero_grad();
    backward_total(base, step.total, 1.0, params);
    const std::vector<std::uint8_t> base_sig = base.activation_signature();

    // Objective with the alphas frozen at their base values.
    auto probe = [&]() {
      const ForwardTape t = forward(params, batch);
      const SampleLosses s = sample_losses(v, t.severity_logits(), sev);
      const double ax = axis_loss(t.axis_logits(), axis).value;
      double value = 0.0;
      if (reweight) {
        const ClassLoss classes = per_class_losses(s, sev, options.reduction);
        value = combine_losses(classes, alphas, ax).total_loss;
      } else {
        value = batch_objective(s).value + ax;
      }
      return Probe{value, t.activation_signature()};
    };

    for (std::size_t i = 0; i < params.size(); ++i) {
      for (std::size_t j = 0; j < params[i].value.size(); ++j) {
        const double analytic = params[i].grad[j];
        const double original = params[i].value[j];
        double h = eps;
        bool valid = false;
        double numeric = 0.0;
        auto central = [&](double step, bool& same_pattern) {
          params.mutable_value(i)[j] = original + step;
          const Probe plus = probe();
          params.mutable_value(i)[j] = original - step;
          const Probe minus = probe();
          params.mutable_value(i)[j] = original;
          same_pattern = same_pattern && plus.signature == base_sig && minus.signature == base_sig;
          return (plus.value - minus.value) / (2.0 * step);
        };
        for (int attempt = 0; attempt <= kMaxStepShrinks && !valid; ++attempt, h /= 10.0) {
          valid = true;
          const double coarse = central(h, valid);
          const double fine = central(h / 2.0, valid);
          // Richardson extrapolation cancels the h^2 term of the central difference.
          numeric = (4.0 * fine - coarse) / 3.0;
        }
        if (!valid) {
          ++result.skipped;
          continue;
        }
        const double denom = std::max({std::abs(analytic), std::abs(numeric), kGradCheckFloor});
        const double err = std::abs(analytic - numeric) / denom;
        if (err > result.max_rel_error) {
          result.max_rel_error = err;
          result.worst_param = params[i].name;
          result.worst_index = j;
          result.worst_analytic = analytic;
          result.worst_numeric = numeric;
        }
        ++result.checked;
      }
    }
  }
  return result;
}

}  // namespace gradbal
