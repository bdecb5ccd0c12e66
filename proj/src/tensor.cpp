#include "gradbal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace gradbal {

std::size_t shape_size(std::span<const std::size_t> dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> dims, double fill)
    : shape(std::move(dims)), values(shape_size(shape), fill) {}

std::span<double> Tensor::row(std::size_t i) {
  const std::size_t stride = values.size() / shape.at(0);
  return std::span<double>(values).subspan(i * stride, stride);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const std::size_t stride = values.size() / shape.at(0);
  return std::span<const double>(values).subspan(i * stride, stride);
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double v) { std::fill(values.begin(), values.end(), v); }

}  // namespace gradbal
