#pragma once

#include <string>

#include <cstddef>
#include <cstdint>

#include "gradbal/losses.hpp"
#include "gradbal/nn.hpp"

namespace gradbal {

struct GradCheckResult {
  /// max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates whose stencil crossed a ReLU or pooling boundary even at
  /// the smallest step tried; the central difference is meaningless there.
  std::size_t skipped = 0;
  /// Location and values of the worst coordinate.
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

inline constexpr double kGradCheckFloor = 1e-8;

/// Small model for gradient checks: 8x8 input, widths 2/3/6, both branches.
ModelConfig tiny_model_config(bool dft_fusion = true);

/// Compares analytic gradients of the total loss (both the alpha-weighted
/// and the unweighted severity term, alphas frozen) against central
/// differences (Richardson-extrapolated from steps eps and eps/2) on every
/// parameter of a freshly initialized model.
/// Throws ArgumentError unless eps is in [1e-5, 1e-2].
GradCheckResult finite_diff_check(const ModelConfig& config, const LossVariant& variant,
                                  std::uint64_t seed, double eps = 1e-3);

}  // namespace gradbal
