#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradbal/tensor.hpp"

namespace gradbal {

inline constexpr std::size_t kSeverityClasses = 3;
inline constexpr std::size_t kAxisClasses = 3;

/// Two conv blocks (3x3 same-padding conv, ReLU, 2x2 max-pool), a dense
/// trunk, and two affine heads. With `dft_fusion` a second encoder at half
/// width reads the log-magnitude spectrum and its trunk is concatenated with
/// the spatial trunk before the heads.
struct ModelConfig {
  std::size_t height = 28;
  std::size_t width = 28;
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t trunk_width = 64;
  std::size_t severity_classes = kSeverityClasses;
  std::size_t axis_classes = kAxisClasses;
  bool dft_fusion = false;
  /// Severity head emits K-1 threshold logits instead of K class logits.
  bool ordinal = false;
  std::uint64_t seed = 0;

  /// Throws ConfigError.
  void validate() const;
  std::size_t severity_outputs() const { return ordinal ? severity_classes - 1 : severity_classes; }
  /// Width of the feature vector the heads read.
  std::size_t feature_width() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  /// Member of the severity-head subset whose gradient norm drives reweighting.
  bool classification_head = false;
};

/// Ordered, uniquely named parameters with paired gradient buffers. Every
/// mutable access to a value bumps `version()`, which tapes use to detect
/// replay against modified weights.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(ModelConfig config) : config_(config) {}

  std::size_t add(std::string name, std::vector<std::size_t> shape, bool classification_head);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t num_values() const noexcept;
  const std::vector<Parameter>& params() const noexcept { return params_; }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  std::size_t index_of(std::string_view name) const;

  Tensor& mutable_value(std::size_t i);
  Tensor& grad(std::size_t i) { return params_.at(i).grad; }
  void zero_grad();

  std::uint64_t version() const noexcept { return version_; }

  /// Flat copy of all gradient buffers in parameter order.
  std::vector<double> flat_grad() const;
  /// Number of scalar values in the classification-head subset.
  std::size_t head_size() const;

 private:
  ModelConfig config_;
  std::vector<Parameter> params_;
  std::uint64_t version_ = 0;
};

/// Deterministic Glorot-uniform initialization; biases zero.
ParamStore init_model(const ModelConfig& config);

/// A scalar function of one tape's logits together with its gradient with
/// respect to those logits. Linear combinations of objectives from the same
/// tape are objectives of that tape; combination weights are constants.
struct Objective {
  std::uint64_t tape_id = 0;
  double value = 0.0;
  Tensor d_severity;  // B x severity_outputs
  Tensor d_axis;      // B x axis_classes

  /// this += scale * other. Throws InvalidHandle on tape mismatch.
  Objective& add_scaled(const Objective& other, double scale);
};

struct BranchCache {
  Tensor input;    // B x 1 x H x W
  Tensor act1;     // after conv1 + ReLU
  Tensor pool1;
  std::vector<std::uint32_t> arg1;
  Tensor act2;
  Tensor pool2;
  std::vector<std::uint32_t> arg2;
  Tensor trunk;    // B x T after ReLU
};

/// Activations recorded by `forward`, sufficient to replay the backward pass.
/// Immutable once constructed.
class ForwardTape {
 public:
  std::uint64_t id() const noexcept { return id_; }
  std::size_t batch_size() const noexcept { return batch_; }
  const Tensor& severity_logits() const noexcept { return severity_logits_; }
  const Tensor& axis_logits() const noexcept { return axis_logits_; }
  /// Head input, B x feature_width.
  const Tensor& features() const noexcept { return features_; }
  const ParamStore* store() const noexcept { return store_; }
  std::uint64_t store_version() const noexcept { return version_; }

  Objective severity_objective(double value, Tensor d_severity) const;
  Objective axis_objective(double value, Tensor d_axis) const;
  Objective zero_objective() const;

  /// ReLU masks and pooling choices; equal signatures mean the network is
  /// locally the same piecewise-linear map.
  std::vector<std::uint8_t> activation_signature() const;

 private:
  friend struct TapeBuilder;
  std::uint64_t id_ = 0;
  std::size_t batch_ = 0;
  const ParamStore* store_ = nullptr;
  std::uint64_t version_ = 0;
  BranchCache spatial_;
  BranchCache spectral_;
  bool has_spectral_ = false;
  Tensor features_;
  Tensor severity_logits_;
  Tensor axis_logits_;

  friend void backward_total(const ForwardTape&, const Objective&, double, ParamStore&);
};

/// batch: B x 1 x H x W. Throws NumericFault naming the layer on non-finite
/// values, ConfigError on shape mismatch.
ForwardTape forward(const ParamStore& params, const Tensor& batch);

/// Accumulates upstream * d(objective)/d(theta) into the gradient buffers.
void backward_total(const ForwardTape& tape, const Objective& objective, double upstream,
                    ParamStore& params);

/// Gradient of `objective` over the severity head only, flattened as
/// [weights row-major, bias]. Leaves every gradient buffer untouched.
std::vector<double> head_grad(const ForwardTape& tape, const Objective& objective,
                              const ParamStore& params);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParamStore& params);
};

/// Bias-corrected Adam; throws ConfigError when state shapes do not match.
void adam_step(ParamStore& params, AdamState& state, double lr, const AdamOptions& options = {});

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total_steps)) / 2.
double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min);

/// Unnormalized 2D DFT (rows then columns), DC at index 0.
std::vector<std::complex<double>> dft2(std::span<const double> image, std::size_t height,
                                       std::size_t width);

/// log(1 + |F(u, v)|) of the 2D DFT, same layout as the input.
std::vector<double> dft_features(std::span<const double> image, std::size_t height,
                                 std::size_t width);

}  // namespace gradbal
