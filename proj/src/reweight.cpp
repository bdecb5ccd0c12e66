#include "gradbal/reweight.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gradbal/errors.hpp"

namespace gradbal {

GradNorms class_grad_norms(const ForwardTape& tape, const ClassLoss& class_losses,
                           const ParamStore& params) {
  GradNorms out;
  for (std::size_t c = 0; c < 3; ++c) {
    out.present[c] = class_losses.present[c];
    if (!out.present[c]) continue;
    if (class_losses.d_logits[c].empty())
      throw InvalidHandle("class loss carries no logit gradient");
    const Objective obj = tape.severity_objective(class_losses.loss[c], class_losses.d_logits[c]);
    const auto g = head_grad(tape, obj, params);
    double sq = 0.0;
    for (double v : g) sq += v * v;
    out.phi[c] = std::sqrt(sq);
  }
  return out;
}

AlphaWeights compute_alpha(const GradNorms& norms, double eps) {
  double smallest = std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t c = 0; c < 3; ++c) {
    if (!norms.present[c]) continue;
    any = true;
    smallest = std::min(smallest, std::max(norms.phi[c], eps));
  }
  if (!any) throw ArgumentError("compute_alpha: no class present");
  AlphaWeights out;
  for (std::size_t c = 0; c < 3; ++c) {
    out.present[c] = norms.present[c];
    if (out.present[c]) out.alpha[c] = smallest / std::max(norms.phi[c], eps);
  }
  return out;
}

LossBundle combine_losses(const ClassLoss& class_losses, const AlphaWeights& alphas,
                          double axis_loss) {
  if (class_losses.present != alphas.present)
    throw ContractError("class losses and alphas disagree on present classes");
  LossBundle b;
  b.class_losses = class_losses;
  b.axis_loss = axis_loss;
  for (std::size_t c = 0; c < 3; ++c)
    if (alphas.present[c]) b.cls_loss += alphas.alpha[c] * class_losses.loss[c];
  b.total_loss = b.cls_loss + b.axis_loss;
  return b;
}

Objective combine_objectives(const ForwardTape& tape, const ClassLoss& class_losses,
                             const AlphaWeights& alphas, const Objective& axis) {
  if (class_losses.present != alphas.present)
    throw ContractError("class losses and alphas disagree on present classes");
  Objective total = tape.zero_objective();
  for (std::size_t c = 0; c < 3; ++c) {
    if (!alphas.present[c]) continue;
    total.add_scaled(tape.severity_objective(class_losses.loss[c], class_losses.d_logits[c]),
                     alphas.alpha[c]);
  }
  total.add_scaled(axis, 1.0);
  return total;
}

StepLoss step_objective(const ForwardTape& tape, const ParamStore& params,
                        std::span<const int> severity_targets, std::span<const int> axis_targets,
                        const StepOptions& options) {
  const SampleLosses samples =
      sample_losses(options.variant, tape.severity_logits(), severity_targets);
  const ScalarLoss axis = axis_loss(tape.axis_logits(), axis_targets);
  const Objective axis_obj = tape.axis_objective(axis.value, axis.d_logits);

  StepLoss out;
  const ClassLoss classes = per_class_losses(samples, severity_targets, options.reduction);
  if (options.reweight) {
    out.norms = class_grad_norms(tape, classes, params);
    out.alphas = compute_alpha(out.norms);
    out.bundle = combine_losses(classes, out.alphas, axis.value);
    out.total = combine_objectives(tape, classes, out.alphas, axis_obj);
  } else {
    const ScalarLoss cls = batch_objective(samples);
    out.alphas.present = classes.present;
    for (std::size_t c = 0; c < 3; ++c) out.alphas.alpha[c] = classes.present[c] ? 1.0 : 0.0;
    out.norms.present = classes.present;
    out.bundle.class_losses = classes;
    out.bundle.axis_loss = axis.value;
    out.bundle.cls_loss = cls.value;
    out.bundle.total_loss = cls.value + axis.value;
    out.total = tape.severity_objective(cls.value, cls.d_logits);
    out.total.add_scaled(axis_obj, 1.0);
  }
  return out;
}

}  // namespace gradbal
