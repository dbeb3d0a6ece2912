#include "vl/mask.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace vl {

Mask::Mask(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), labels_(height * width, fill ? 1 : 0) {}

Mask::Mask(std::size_t height, std::size_t width,
           std::vector<std::uint8_t> labels)
    : height_(height), width_(width), labels_(std::move(labels)) {
  if (labels_.size() != height * width) {
    throw std::invalid_argument("Mask: " + std::to_string(labels_.size()) +
                                " labels for " + std::to_string(height) + "x" +
                                std::to_string(width));
  }
  for (auto& l : labels_) l = l != 0 ? 1 : 0;
}

std::size_t Mask::foreground_count() const {
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), std::uint8_t{1}));
}

std::vector<Pixel> Mask::foreground() const {
  std::vector<Pixel> out;
  for (std::size_t r = 0; r < height_; ++r)
    for (std::size_t c = 0; c < width_; ++c)
      if (at(r, c)) out.push_back({r, c});
  return out;
}

std::vector<Pixel> Mask::background() const {
  std::vector<Pixel> out;
  for (std::size_t r = 0; r < height_; ++r)
    for (std::size_t c = 0; c < width_; ++c)
      if (!at(r, c)) out.push_back({r, c});
  return out;
}

}  // namespace vl
