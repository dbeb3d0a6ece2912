#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "vl/grid.hpp"
#include "vl/mask.hpp"

namespace vl {

/// File-format or filesystem failure; the message always names the path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what), path_(path) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Binary PPM (P6), 8-bit. Values in [0, 1] are quantized to round(255 v).
void write_ppm(const std::filesystem::path& path, const DenseGrid& rgb);
DenseGrid read_ppm(const std::filesystem::path& path);

/// Binary PGM (P5), 8-bit: 0 background, 255 foreground. On read any sample
/// >= 128 counts as foreground.
void write_pgm(const std::filesystem::path& path, const Mask& mask);
Mask read_pgm(const std::filesystem::path& path);

}  // namespace vl
