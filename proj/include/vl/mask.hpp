#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace vl {

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Binary height x width label map: 1 marks the foreground part, 0 the
/// background part.
class Mask {
 public:
  Mask() = default;
  Mask(std::size_t height, std::size_t width, bool fill = false);
  Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> labels);

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return labels_.size(); }

  bool at(std::size_t row, std::size_t col) const {
    return labels_[row * width_ + col] != 0;
  }
  void set(std::size_t row, std::size_t col, bool fg) {
    labels_[row * width_ + col] = fg ? 1 : 0;
  }
  bool operator[](std::size_t i) const { return labels_[i] != 0; }

  std::size_t foreground_count() const;
  std::size_t background_count() const { return size() - foreground_count(); }

  /// Row-major pixel lists of each part.
  std::vector<Pixel> foreground() const;
  std::vector<Pixel> background() const;

  const std::vector<std::uint8_t>& labels() const { return labels_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> labels_;
};

}  // namespace vl
