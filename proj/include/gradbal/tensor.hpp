#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gradbal {

/// Dense row-major tensor of 64-bit floats.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims, double fill = 0.0);
  Tensor(std::initializer_list<std::size_t> dims, double fill = 0.0)
      : Tensor(std::vector<std::size_t>(dims), fill) {}

  std::size_t size() const noexcept { return values.size(); }
  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t axis) const { return shape.at(axis); }
  bool empty() const noexcept { return values.empty(); }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// Row i of a tensor viewed as (dim(0), size/dim(0)).
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;

  bool all_finite() const noexcept;
  void fill(double v);

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t shape_size(std::span<const std::size_t> dims);

}  // namespace gradbal
