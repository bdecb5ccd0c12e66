#include "gradbal/losses.hpp"

#include <algorithm>
#include <cmath>

#include "gradbal/errors.hpp"

namespace gradbal {
namespace {

void check_batch(const Tensor& logits, std::span<const int> targets, std::size_t num_classes) {
  if (logits.rank() != 2) throw ConfigError("logits must be B x K");
  if (logits.dim(0) != targets.size()) throw ConfigError("logits and targets differ in length");
  for (int t : targets)
    if (t < 0 || static_cast<std::size_t>(t) >= num_classes)
      throw LabelError("target " + std::to_string(t) + " outside [0, " +
                       std::to_string(num_classes) + ")");
  if (!logits.all_finite()) throw NumericFault("loss", "non-finite logits");
}

// log-sum-exp of a row and the softmax probabilities.
double log_softmax_row(std::span<const double> z, std::span<double> probs) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (std::size_t j = 0; j < z.size(); ++j) {
    probs[j] = std::exp(z[j] - m);
    s += probs[j];
  }
  for (double& p : probs) p /= s;
  return m + std::log(s);
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

LossVariant LossVariant::parse(std::string_view tag) {
  LossVariant v;
  if (tag == "ce")
    v.kind = LossKind::ce;
  else if (tag == "weighted_ce")
    v.kind = LossKind::weighted_ce;
  else if (tag == "focal")
    v.kind = LossKind::focal;
  else if (tag == "ordinal")
    v.kind = LossKind::ordinal;
  else
    throw ConfigError("unknown loss variant: " + std::string(tag));
  return v;
}

std::string LossVariant::tag() const {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::weighted_ce: return "weighted_ce";
    case LossKind::focal: return "focal";
    case LossKind::ordinal: return "ordinal";
  }
  return "ce";
}

void LossVariant::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("focal gamma must be >= 0");
  for (double w : class_weights)
    if (!(w > 0.0) || !std::isfinite(w))
      throw ConfigError("class weights must be positive and finite");
}

SampleLosses softmax_ce(const Tensor& logits, std::span<const int> targets) {
  check_batch(logits, targets, logits.rank() == 2 ? logits.dim(1) : 0);
  const std::size_t batch = logits.dim(0);
  SampleLosses out{std::vector<double>(batch), Tensor(logits.shape), static_cast<double>(batch)};
  for (std::size_t i = 0; i < batch; ++i) {
    auto g = out.d_logits.row(i);
    const double lse = log_softmax_row(logits.row(i), g);
    const auto y = static_cast<std::size_t>(targets[i]);
    out.loss[i] = lse - logits.row(i)[y];
    g[y] -= 1.0;
  }
  return out;
}

SampleLosses weighted_ce(const Tensor& logits, std::span<const int> targets,
                         const std::array<double, 3>& weights) {
  if (logits.rank() != 2 || logits.dim(1) != weights.size())
    throw ConfigError("weighted_ce expects 3-class logits");
  SampleLosses out = softmax_ce(logits, targets);
  for (std::size_t i = 0; i < out.loss.size(); ++i) {
    const double w = weights[static_cast<std::size_t>(targets[i])];
    out.loss[i] *= w;
    for (double& g : out.d_logits.row(i)) g *= w;
  }
  return out;
}

SampleLosses focal_loss(const Tensor& logits, std::span<const int> targets, double gamma) {
  if (!(gamma >= 0.0)) throw ConfigError("focal gamma must be >= 0");
  check_batch(logits, targets, logits.rank() == 2 ? logits.dim(1) : 0);
  const std::size_t batch = logits.dim(0);
  SampleLosses out{std::vector<double>(batch), Tensor(logits.shape), static_cast<double>(batch)};
  for (std::size_t i = 0; i < batch; ++i) {
    auto probs = out.d_logits.row(i);
    const double lse = log_softmax_row(logits.row(i), probs);
    const auto y = static_cast<std::size_t>(targets[i]);
    const double log_p = logits.row(i)[y] - lse;
    const double p = std::exp(log_p);
    const double q = -std::expm1(log_p);
    const double q_gamma = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
    out.loss[i] = -q_gamma * log_p;
    // d loss / d z_j = (gamma q^(gamma-1) p log p - q^gamma) (delta_yj - p_j)
    double focus = 0.0;
    if (gamma != 0.0 && q > 0.0) focus = gamma * std::pow(q, gamma - 1.0) * p * log_p;
    const double coeff = focus - q_gamma;
    for (std::size_t j = 0; j < probs.size(); ++j) {
      const double delta = j == y ? 1.0 : 0.0;
      probs[j] = coeff * (delta - probs[j]);
    }
  }
  return out;
}

SampleLosses ordinal_corn(const Tensor& threshold_logits, std::span<const int> targets) {
  const std::size_t tasks = threshold_logits.rank() == 2 ? threshold_logits.dim(1) : 0;
  if (tasks == 0) throw ConfigError("ordinal loss needs at least one threshold logit");
  check_batch(threshold_logits, targets, tasks + 1);
  const std::size_t batch = threshold_logits.dim(0);
  SampleLosses out{std::vector<double>(batch), Tensor(threshold_logits.shape), 0.0};
  for (std::size_t i = 0; i < batch; ++i) {
    const auto z = threshold_logits.row(i);
    auto g = out.d_logits.row(i);
    const auto y = static_cast<std::size_t>(targets[i]);
    // Sample i belongs to the subsets S_k = {y >= k} for k = 0..min(y, K-2).
    const std::size_t last = std::min(y, tasks - 1);
    for (std::size_t k = 0; k <= last; ++k) {
      const double label = y >= k + 1 ? 1.0 : 0.0;
      out.loss[i] += softplus(z[k]) - label * z[k];
      g[k] = sigmoid(z[k]) - label;
    }
    out.normalizer += static_cast<double>(last + 1);
  }
  return out;
}

double ordinal_corn_loss(const Tensor& threshold_logits, std::span<const int> targets) {
  return batch_objective(ordinal_corn(threshold_logits, targets)).value;
}

std::vector<int> ordinal_predict(const Tensor& threshold_logits) {
  if (threshold_logits.rank() != 2) throw ConfigError("threshold logits must be B x (K-1)");
  if (!threshold_logits.all_finite()) throw NumericFault("ordinal", "non-finite logits");
  std::vector<int> ranks(threshold_logits.dim(0), 0);
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    double running = 1.0;
    for (double z : threshold_logits.row(i)) {
      running *= sigmoid(z);
      if (running > 0.5) ++ranks[i];
    }
  }
  return ranks;
}

std::vector<int> argmax_predict(const Tensor& logits) {
  if (logits.rank() != 2) throw ConfigError("logits must be B x K");
  std::vector<int> out(logits.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto r = logits.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

SampleLosses sample_losses(const LossVariant& variant, const Tensor& logits,
                           std::span<const int> targets) {
  switch (variant.kind) {
    case LossKind::ce: return softmax_ce(logits, targets);
    case LossKind::weighted_ce: return weighted_ce(logits, targets, variant.class_weights);
    case LossKind::focal: return focal_loss(logits, targets, variant.gamma);
    case LossKind::ordinal: return ordinal_corn(logits, targets);
  }
  throw ConfigError("unhandled loss variant");
}

ScalarLoss batch_objective(const SampleLosses& losses) {
  ScalarLoss out{0.0, losses.d_logits};
  for (double l : losses.loss) out.value += l;
  out.value /= losses.normalizer;
  for (double& g : out.d_logits.values) g /= losses.normalizer;
  return out;
}

ScalarLoss axis_loss(const Tensor& axis_logits, std::span<const int> axis_targets) {
  return batch_objective(softmax_ce(axis_logits, axis_targets));
}

std::array<double, 3> weighted_ce_weights(const std::array<std::size_t, 3>& class_counts) {
  std::size_t total = 0;
  for (auto n : class_counts) total += n;
  if (total == 0) throw ArgumentError("weighted_ce_weights: all class counts are zero");
  std::array<double, 3> w{};
  for (std::size_t c = 0; c < 3; ++c)
    w[c] = class_counts[c] == 0
               ? 0.0
               : static_cast<double>(total) / (3.0 * static_cast<double>(class_counts[c]));
  return w;
}

namespace {

ClassLoss reduce_per_class(std::span<const double> per_sample, std::span<const int> targets,
                           ClassReduction reduction, const Tensor* d_logits) {
  if (per_sample.empty()) throw EmptyBatch("per_class_losses: empty batch");
  if (per_sample.size() != targets.size())
    throw ConfigError("per_class_losses: losses and targets differ in length");
  ClassLoss out;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const int t = targets[i];
    if (t < 0 || t >= 3) throw LabelError("severity target outside [0, 3)");
    out.loss[static_cast<std::size_t>(t)] += per_sample[i];
    ++out.count[static_cast<std::size_t>(t)];
  }
  for (std::size_t c = 0; c < 3; ++c) {
    out.present[c] = out.count[c] > 0;
    const double scale = reduction == ClassReduction::mean && out.present[c]
                             ? 1.0 / static_cast<double>(out.count[c])
                             : 1.0;
    if (reduction == ClassReduction::mean && out.present[c])
      out.loss[c] /= static_cast<double>(out.count[c]);
    if (d_logits) {
      out.d_logits[c] = Tensor(d_logits->shape);
      for (std::size_t i = 0; i < targets.size(); ++i) {
        if (static_cast<std::size_t>(targets[i]) != c) continue;
        const auto src = d_logits->row(i);
        auto dst = out.d_logits[c].row(i);
        for (std::size_t j = 0; j < src.size(); ++j) dst[j] = src[j] * scale;
      }
    }
  }
  return out;
}

}  // namespace

ClassLoss per_class_losses(std::span<const double> per_sample, std::span<const int> targets,
                           ClassReduction reduction) {
  return reduce_per_class(per_sample, targets, reduction, nullptr);
}

ClassLoss per_class_losses(const SampleLosses& losses, std::span<const int> targets,
                           ClassReduction reduction) {
  return reduce_per_class(losses.loss, targets, reduction, &losses.d_logits);
}

}  // namespace gradbal
