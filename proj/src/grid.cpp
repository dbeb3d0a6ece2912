#include "vl/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace vl {

std::string Shape::str() const {
  return std::to_string(height) + "x" + std::to_string(width) + "x" +
         std::to_string(channels);
}

DenseGrid::DenseGrid(Shape shape, double fill)
    : shape_(shape), values_(shape.size(), fill) {}

DenseGrid::DenseGrid(Shape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw std::invalid_argument("DenseGrid: " + std::to_string(values_.size()) +
                                " values for shape " + shape_.str());
  }
}

double DenseGrid::item() const {
  if (shape_ != Shape{1, 1, 1}) {
    throw std::logic_error("DenseGrid::item on non-scalar grid " + shape_.str());
  }
  return values_[0];
}

void DenseGrid::fill(double v) { std::fill(values_.begin(), values_.end(), v); }

bool DenseGrid::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

bool DenseGrid::bit_equal(const DenseGrid& other) const {
  return shape_ == other.shape_ &&
         (values_.empty() ||
          std::memcmp(values_.data(), other.values_.data(),
                      values_.size() * sizeof(double)) == 0);
}

double max_abs_diff(const DenseGrid& a, const DenseGrid& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_abs_diff: shape " + a.shape().str() +
                                " vs " + b.shape().str());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]));
  }
  return worst;
}

}  // namespace vl
