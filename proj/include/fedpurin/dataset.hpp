#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedpurin {

/// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

/// Labelled samples. Every label is < num_classes.
struct Dataset {
  Matrix features;
  std::vector<std::size_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t feature_dim() const noexcept { return features.cols; }

  /// Rows `indices` in the given order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Throws ConfigError if a label is out of range or the row count is off.
  void validate() const;

  bool operator==(const Dataset&) const = default;
};

}  // namespace fedpurin
