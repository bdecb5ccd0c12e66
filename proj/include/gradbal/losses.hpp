#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradbal/tensor.hpp"

namespace gradbal {

enum class LossKind { ce, weighted_ce, focal, ordinal };

struct LossVariant {
  LossKind kind = LossKind::ce;
  double gamma = 2.0;
  std::array<double, 3> class_weights{1.0, 1.0, 1.0};

  static LossVariant parse(std::string_view tag);
  std::string tag() const;
  /// Throws ConfigError on negative gamma or non-positive / non-finite weights.
  void validate() const;

  friend bool operator==(const LossVariant&, const LossVariant&) = default;
};

/// Per-sample losses plus the gradient of each sample's loss with respect to
/// that sample's logits (row i of `d_logits` belongs to sample i).
struct SampleLosses {
  std::vector<double> loss;
  Tensor d_logits;
  /// The unweighted batch objective is sum(loss) / normalizer.
  double normalizer = 1.0;
};

/// Scalar loss with its logit gradient.
struct ScalarLoss {
  double value = 0.0;
  Tensor d_logits;
};

/// -log softmax(z)[y], stabilized by max subtraction. Throws LabelError.
SampleLosses softmax_ce(const Tensor& logits, std::span<const int> targets);

/// w[y] * softmax_ce.
SampleLosses weighted_ce(const Tensor& logits, std::span<const int> targets,
                         const std::array<double, 3>& weights);

/// -(1 - p_t)^gamma * log p_t.
SampleLosses focal_loss(const Tensor& logits, std::span<const int> targets, double gamma);

/// Conditional ordinal (CORN) loss over B x (K-1) threshold logits. Sample i
/// takes part in tasks k <= y_i and its loss is the sum of those binary
/// cross-entropies; the normalizer is the total number of task memberships.
SampleLosses ordinal_corn(const Tensor& threshold_logits, std::span<const int> targets);

/// Scalar CORN loss: sum of task BCEs over the union of task subsets,
/// divided by the subset sizes.
double ordinal_corn_loss(const Tensor& threshold_logits, std::span<const int> targets);

/// Rank = number of leading thresholds whose running product of sigmoids
/// exceeds 0.5.
std::vector<int> ordinal_predict(const Tensor& threshold_logits);

/// Argmax rows; first maximum wins.
std::vector<int> argmax_predict(const Tensor& logits);

SampleLosses sample_losses(const LossVariant& variant, const Tensor& logits,
                           std::span<const int> targets);

/// sum(loss) / normalizer with its gradient.
ScalarLoss batch_objective(const SampleLosses& losses);

/// Mean softmax CE of the scan-plane head.
ScalarLoss axis_loss(const Tensor& axis_logits, std::span<const int> axis_targets);

/// Inverse-frequency weights N / (K * n_c); zero-count classes get 0.
/// Throws ArgumentError when every count is zero.
std::array<double, 3> weighted_ce_weights(const std::array<std::size_t, 3>& class_counts);

enum class ClassReduction { mean, sum };

/// Per-class severity losses L^(c) and, when built from SampleLosses, their
/// logit gradients.
struct ClassLoss {
  std::array<double, 3> loss{};
  std::array<std::size_t, 3> count{};
  std::array<bool, 3> present{};
  std::array<Tensor, 3> d_logits{};
};

/// Throws EmptyBatch on empty input, ConfigError on length mismatch and
/// LabelError on targets outside [0, 3).
ClassLoss per_class_losses(std::span<const double> per_sample, std::span<const int> targets,
                           ClassReduction reduction = ClassReduction::mean);
ClassLoss per_class_losses(const SampleLosses& losses, std::span<const int> targets,
                           ClassReduction reduction = ClassReduction::mean);

}  // namespace gradbal
