#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vl {

/// Spatial extent plus channel count of a DenseGrid.
struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  std::size_t pixels() const { return height * width; }
  std::string str() const;

  friend bool operator==(const Shape&, const Shape&) = default;
};

/// Rank-3 grid of doubles stored row-major as (height, width, channels).
///
/// Images, logits, embeddings, convolution kernels and scalars (1x1x1) all
/// live in this one type.
class DenseGrid {
 public:
  DenseGrid() = default;
  explicit DenseGrid(Shape shape, double fill = 0.0);
  DenseGrid(std::size_t height, std::size_t width, std::size_t channels,
            double fill = 0.0)
      : DenseGrid(Shape{height, width, channels}, fill) {}
  DenseGrid(Shape shape, std::vector<double> values);

  static DenseGrid scalar(double v) { return DenseGrid(1, 1, 1, v); }

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::size_t index(std::size_t row, std::size_t col, std::size_t ch) const {
    return (row * shape_.width + col) * shape_.channels + ch;
  }
  double& at(std::size_t row, std::size_t col, std::size_t ch) {
    return values_[index(row, col, ch)];
  }
  double at(std::size_t row, std::size_t col, std::size_t ch) const {
    return values_[index(row, col, ch)];
  }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  /// Channel vector at one pixel.
  std::span<double> pixel(std::size_t row, std::size_t col) {
    return {values_.data() + index(row, col, 0), shape_.channels};
  }
  std::span<const double> pixel(std::size_t row, std::size_t col) const {
    return {values_.data() + index(row, col, 0), shape_.channels};
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  /// Scalar value of a 1x1x1 grid; throws otherwise.
  double item() const;
  void fill(double v);
  bool all_finite() const;

  /// Exact equality of shape and every bit of every value.
  bool bit_equal(const DenseGrid& other) const;

 private:
  Shape shape_;
  std::vector<double> values_;
};

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const DenseGrid& a, const DenseGrid& b);

}  // namespace vl
