#pragma once

#include <array>
#include <span>

#include "gradbal/losses.hpp"
#include "gradbal/nn.hpp"

namespace gradbal {

inline constexpr double kNormClamp = 1e-12;

/// Per-class l2 norm of the severity-head gradient of L^(c).
struct GradNorms {
  std::array<double, 3> phi{};
  std::array<bool, 3> present{};
};

/// alpha_c = min over present classes of phi~ / phi~_c, phi~ = max(phi, eps).
struct AlphaWeights {
  std::array<double, 3> alpha{};
  std::array<bool, 3> present{};
};

struct LossBundle {
  ClassLoss class_losses;
  double axis_loss = 0.0;
  /// sum over present c of alpha_c * L^(c)
  double cls_loss = 0.0;
  /// cls_loss + axis_loss
  double total_loss = 0.0;
};

/// Leaves the gradient buffers of `params` untouched.
GradNorms class_grad_norms(const ForwardTape& tape, const ClassLoss& class_losses,
                           const ParamStore& params);

/// Throws ArgumentError when no class is present.
AlphaWeights compute_alpha(const GradNorms& norms, double eps = kNormClamp);

/// Throws ContractError when presence flags disagree.
LossBundle combine_losses(const ClassLoss& class_losses, const AlphaWeights& alphas,
                          double axis_loss);

/// The differentiable counterpart of combine_losses: sum alpha_c * L^(c) +
/// L_axis as an objective of `tape`, alphas held constant.
Objective combine_objectives(const ForwardTape& tape, const ClassLoss& class_losses,
                             const AlphaWeights& alphas, const Objective& axis);

struct StepOptions {
  LossVariant variant;
  bool reweight = true;
  ClassReduction reduction = ClassReduction::mean;
};

struct StepLoss {
  LossBundle bundle;
  GradNorms norms;
  AlphaWeights alphas;
  Objective total;
};

/// Builds the per-batch training objective. With reweighting the severity
/// term is the alpha-weighted sum of per-class losses; without it the plain
/// batch objective of the loss variant. The axis term is always mean CE.
StepLoss step_objective(const ForwardTape& tape, const ParamStore& params,
                        std::span<const int> severity_targets, std::span<const int> axis_targets,
                        const StepOptions& options);

}  // namespace gradbal
