#include "vl/netpbm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <vector>

namespace vl {

namespace {

struct Header {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t maxval = 0;
  std::size_t data_offset = 0;
};

std::vector<unsigned char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Header tokens are separated by whitespace; '#' starts a comment that runs to
// the end of the line. Exactly one whitespace byte follows maxval.
Header parse_header(const std::vector<unsigned char>& bytes, const char* magic,
                    const std::filesystem::path& path) {
  if (bytes.size() < 2 || bytes[0] != magic[0] || bytes[1] != magic[1]) {
    throw IoError(path, std::string("not a binary ") + magic + " file (bad magic)");
  }
  std::size_t pos = 2;
  auto next_number = [&](const char* what) -> std::size_t {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw IoError(path, std::string("malformed header: missing ") + what);
    }
    std::size_t v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      if (v > (1u << 24)) throw IoError(path, std::string("malformed header: ") + what + " too large");
      ++pos;
    }
    return v;
  };
  Header h;
  h.width = next_number("width");
  h.height = next_number("height");
  h.maxval = next_number("maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw IoError(path, "malformed header: no separator after maxval");
  }
  h.data_offset = pos + 1;
  if (h.width == 0 || h.height == 0) throw IoError(path, "zero image dimension");
  if (h.maxval == 0 || h.maxval > 255) {
    throw IoError(path, "unsupported maxval " + std::to_string(h.maxval) + " (8-bit only)");
  }
  return h;
}

void write_bytes(const std::filesystem::path& path, const std::string& header,
                 const std::vector<unsigned char>& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError(path, "write failed");
}

std::string header_text(const char* magic, std::size_t w, std::size_t h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const DenseGrid& rgb) {
  if (rgb.channels() != 3) {
    throw IoError(path, "PPM needs 3 channels, grid is " + rgb.shape().str());
  }
  std::vector<unsigned char> data(rgb.size());
  for (std::size_t i = 0; i < rgb.size(); ++i) {
    const double v = std::clamp(rgb[i], 0.0, 1.0);
    data[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  write_bytes(path, header_text("P6", rgb.width(), rgb.height()), data);
}

DenseGrid read_ppm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const Header h = parse_header(bytes, "P6", path);
  const std::size_t need = h.width * h.height * 3;
  if (bytes.size() - h.data_offset < need) {
    throw IoError(path, "truncated pixel data: expected " + std::to_string(need) +
                            " bytes, found " + std::to_string(bytes.size() - h.data_offset));
  }
  DenseGrid grid(h.height, h.width, 3);
  // Divide rather than multiply by 1/maxval so a byte k decodes to exactly k / maxval.
  const double maxval = static_cast<double>(h.maxval);
  for (std::size_t i = 0; i < need; ++i) {
    grid[i] = static_cast<double>(bytes[h.data_offset + i]) / maxval;
  }
  return grid;
}

void write_pgm(const std::filesystem::path& path, const Mask& mask) {
  std::vector<unsigned char> data(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) data[i] = mask[i] ? 255 : 0;
  write_bytes(path, header_text("P5", mask.width(), mask.height()), data);
}

Mask read_pgm(const std::filesystem::path& path) {
  const auto bytes = slurp(path);
  const Header h = parse_header(bytes, "P5", path);
  const std::size_t need = h.width * h.height;
  if (bytes.size() - h.data_offset < need) {
    throw IoError(path, "truncated pixel data: expected " + std::to_string(need) +
                            " bytes, found " + std::to_string(bytes.size() - h.data_offset));
  }
  const std::size_t threshold = (h.maxval + 1) / 2;
  std::vector<std::uint8_t> labels(need);
  for (std::size_t i = 0; i < need; ++i) {
    labels[i] = bytes[h.data_offset + i] >= threshold ? 1 : 0;
  }
  return Mask(h.height, h.width, std::move(labels));
}

}  // namespace vl
