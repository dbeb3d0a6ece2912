#include "vl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "vl/netpbm.hpp"
#include "vl/random.hpp"

namespace vl {

namespace {

using Color = std::array<double, 3>;

enum class ShapeKind { Disc, Rectangle, Triangle };

struct Object {
  ShapeKind kind = ShapeKind::Disc;
  double radius = 0.0;   // disc radius, triangle circumradius
  double half_w = 0.0;   // rectangle
  double half_h = 0.0;
  double angle = 0.0;    // triangle rotation
  Color color{};
  double row = 0.0, col = 0.0;  // center
  double v_row = 0.0, v_col = 0.0;

  double bound() const {
    return kind == ShapeKind::Rectangle ? std::hypot(half_w, half_h) : radius;
  }

  bool covers(double y, double x) const {
    const double dy = y - row;
    const double dx = x - col;
    switch (kind) {
      case ShapeKind::Disc:
        return dx * dx + dy * dy <= radius * radius;
      case ShapeKind::Rectangle:
        return std::abs(dx) <= half_w && std::abs(dy) <= half_h;
      case ShapeKind::Triangle: {
        std::array<double, 3> vx{}, vy{};
        for (int k = 0; k < 3; ++k) {
          const double a = angle + 2.0 * std::numbers::pi * k / 3.0;
          vx[k] = radius * std::cos(a);
          vy[k] = radius * std::sin(a);
        }
        bool has_neg = false, has_pos = false;
        for (int k = 0; k < 3; ++k) {
          const int n = (k + 1) % 3;
          const double cross = (vx[n] - vx[k]) * (dy - vy[k]) - (vy[n] - vy[k]) * (dx - vx[k]);
          has_neg |= cross < 0.0;
          has_pos |= cross > 0.0;
        }
        return !(has_neg && has_pos);
      }
    }
    return false;
  }
};

double color_distance(const Color& a, const Color& b) {
  return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                   (a[2] - b[2]) * (a[2] - b[2]));
}

Object random_shape(Rng& rng, double min_r, double max_r) {
  Object o;
  o.kind = static_cast<ShapeKind>(uniform_index(rng, 3));
  o.radius = uniform_real(rng, min_r, max_r);
  o.half_w = o.radius * uniform_real(rng, 0.6, 1.0);
  o.half_h = o.radius * uniform_real(rng, 0.6, 1.0);
  o.angle = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
  return o;
}

class Scene {
 public:
  Scene(double size) : size_(size) {}

  double lo(const Object& o) const { return o.bound() + 1.0; }
  double hi(const Object& o) const { return size_ - o.bound() - 1.0; }

  bool inside(const Object& o) const {
    return o.row >= lo(o) && o.row <= hi(o) && o.col >= lo(o) && o.col <= hi(o);
  }

  // Clearance of two pixels between bounding circles keeps the rasterized
  // supports from touching, even diagonally.
  static bool clear(const Object& a, const Object& b) {
    return std::hypot(a.row - b.row, a.col - b.col) > a.bound() + b.bound() + 2.0;
  }

  void place_randomly(Object& o, const std::vector<Object>& placed, Rng& rng) const {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      o.row = uniform_real(rng, lo(o), hi(o));
      o.col = uniform_real(rng, lo(o), hi(o));
      if (std::all_of(placed.begin(), placed.end(),
                      [&](const Object& p) { return clear(o, p); })) {
        return;
      }
    }
    throw std::runtime_error("synthetic: cannot place " +
                             std::to_string(placed.size() + 1) +
                             " non-overlapping objects in a " +
                             std::to_string(static_cast<int>(size_)) + " pixel frame");
  }

  void advance(Object& o, Rng& rng) const {
    std::normal_distribution<double> jitter(0.0, 0.3);
    o.v_row += jitter(rng);
    o.v_col += jitter(rng);
    const double speed = std::hypot(o.v_row, o.v_col);
    if (speed > 2.5) {
      o.v_row *= 2.5 / speed;
      o.v_col *= 2.5 / speed;
    }
    o.row += o.v_row;
    o.col += o.v_col;
    if (o.row < lo(o)) { o.row = 2 * lo(o) - o.row; o.v_row = -o.v_row; }
    if (o.row > hi(o)) { o.row = 2 * hi(o) - o.row; o.v_row = -o.v_row; }
    if (o.col < lo(o)) { o.col = 2 * lo(o) - o.col; o.v_col = -o.v_col; }
    if (o.col > hi(o)) { o.col = 2 * hi(o) - o.col; o.v_col = -o.v_col; }
    o.row = std::clamp(o.row, lo(o), hi(o));
    o.col = std::clamp(o.col, lo(o), hi(o));
  }

 private:
  double size_;
};

DenseGrid render_background(std::size_t size, const Color& base, Rng& rng) {
  DenseGrid plate(size, size, 3);
  for (std::size_t c = 0; c < 3; ++c) {
    std::array<double, 3> fr{}, fc{}, phase{}, amp{};
    for (int k = 0; k < 3; ++k) {
      fr[k] = uniform_real(rng, 0.05, 0.6);
      fc[k] = uniform_real(rng, 0.05, 0.6);
      phase[k] = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
      amp[k] = uniform_real(rng, 0.02, 0.07);
    }
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t col = 0; col < size; ++col) {
        double v = base[c] + uniform_real(rng, -0.04, 0.04);
        for (int k = 0; k < 3; ++k) {
          v += amp[k] * std::sin(fr[k] * static_cast<double>(r) +
                                 fc[k] * static_cast<double>(col) + phase[k]);
        }
        plate.at(r, col, c) = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return plate;
}

void paint(DenseGrid& frame, const Object& o, Mask* mask) {
  const auto size = static_cast<std::ptrdiff_t>(frame.height());
  const double b = o.bound();
  const auto r0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(o.row - b - 1)));
  const auto r1 = std::min<std::ptrdiff_t>(size - 1, static_cast<std::ptrdiff_t>(std::ceil(o.row + b + 1)));
  const auto c0 = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::floor(o.col - b - 1)));
  const auto c1 = std::min<std::ptrdiff_t>(size - 1, static_cast<std::ptrdiff_t>(std::ceil(o.col + b + 1)));
  for (std::ptrdiff_t r = r0; r <= r1; ++r) {
    for (std::ptrdiff_t c = c0; c <= c1; ++c) {
      if (!o.covers(static_cast<double>(r) + 0.5, static_cast<double>(c) + 0.5)) continue;
      const auto ur = static_cast<std::size_t>(r);
      const auto uc = static_cast<std::size_t>(c);
      for (std::size_t ch = 0; ch < 3; ++ch) frame.at(ur, uc, ch) = o.color[ch];
      if (mask != nullptr) mask->set(ur, uc, true);
    }
  }
}

VideoSequence generate_video(const SynthConfig& cfg, std::uint64_t split_tag,
                             std::size_t index, const std::string& name,
                             SynthTrace* trace) {
  Rng rng(derive_seed({cfg.seed, split_tag, index}));
  const auto size = static_cast<double>(cfg.image_size);
  const Scene scene(size);

  Color base{};
  for (double& v : base) v = uniform_real(rng, 0.15, 0.85);
  DenseGrid plate = render_background(cfg.image_size, base, rng);

  Object target = random_shape(rng, size / 10.0, size / 6.0);
  do {
    for (double& v : target.color) v = uniform_real(rng, 0.05, 0.95);
  } while (color_distance(target.color, base) < 0.45);

  std::vector<Object> objects{target};
  for (std::size_t d = 0; d < cfg.distractor_count; ++d) {
    Object o = random_shape(rng, size / 12.0, size / 7.0);
    std::normal_distribution<double> dir(0.0, 1.0);
    Color offset{dir(rng), dir(rng), dir(rng)};
    const double len = std::max(1e-12, std::hypot(offset[0], offset[1], offset[2]));
    const double dist = uniform_real(rng, 0.3, 0.95) * kDistractorColorRadius;
    for (std::size_t c = 0; c < 3; ++c) {
      o.color[c] = std::clamp(target.color[c] + dist * offset[c] / len, 0.0, 1.0);
    }
    objects.push_back(o);
  }

  for (const Object& o : objects) {
    if (scene.hi(o) < scene.lo(o)) {
      throw std::runtime_error("synthetic: object of radius " + std::to_string(o.bound()) +
                               " cannot fit image_size " + std::to_string(cfg.image_size));
    }
  }
  {
    std::vector<Object> placed;
    for (Object& o : objects) {
      scene.place_randomly(o, placed, rng);
      const double heading = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
      const double speed = uniform_real(rng, 0.5, 2.0);
      o.v_row = speed * std::sin(heading);
      o.v_col = speed * std::cos(heading);
      placed.push_back(o);
    }
  }

  VideoSequence seq;
  seq.name = name;
  seq.v_id = index;
  for (std::size_t f = 0; f < cfg.frames_per_video; ++f) {
    if (f > 0) {
      std::vector<Object> placed;
      for (Object& o : objects) {
        if (uniform_real(rng, 0.0, 1.0) < 0.08) {
          scene.place_randomly(o, placed, rng);
        } else {
          scene.advance(o, rng);
        }
        if (!std::all_of(placed.begin(), placed.end(),
                         [&](const Object& p) { return Scene::clear(o, p); })) {
          scene.place_randomly(o, placed, rng);
        }
        placed.push_back(o);
      }
    }
    DenseGrid frame = plate;
    Mask mask(cfg.image_size, cfg.image_size);
    for (std::size_t k = 1; k < objects.size(); ++k) paint(frame, objects[k], nullptr);
    paint(frame, objects[0], &mask);
    seq.frames.push_back(std::move(frame));
    seq.masks.push_back(std::move(mask));
  }
  if (trace != nullptr) trace->backgrounds.push_back(std::move(plate));
  return seq;
}

std::string video_name(const char* split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%02zu", split, index);
  return buf;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  if (cfg.num_train_videos < 1 || cfg.num_test_videos < 1) {
    throw std::invalid_argument("synth: video counts must be >= 1");
  }
  if (cfg.frames_per_video < 2) throw std::invalid_argument("synth: frames_per_video must be >= 2");
  if (cfg.image_size < 16) throw std::invalid_argument("synth: image_size must be >= 16");
}

Dataset generate_synthetic(const SynthConfig& cfg, SynthTrace* trace) {
  validate(cfg);
  Dataset data;
  for (std::size_t i = 0; i < cfg.num_train_videos; ++i) {
    data.train.push_back(generate_video(cfg, 1, i, video_name("train", i), trace));
  }
  for (std::size_t i = 0; i < cfg.num_test_videos; ++i) {
    data.test.push_back(generate_video(cfg, 2, i, video_name("test", i), trace));
  }
  return data;
}

std::string frame_stem(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05zu", index);
  return buf;
}

namespace {

void write_split(const std::filesystem::path& root, const std::string& split,
                 const std::vector<VideoSequence>& videos) {
  namespace fs = std::filesystem;
  const fs::path list = root / "sets" / (split + ".txt");
  std::ofstream out(list, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(list, "cannot open for writing");
  for (const VideoSequence& v : videos) {
    if (v.frames.size() != v.masks.size()) {
      throw std::invalid_argument("write_dataset: video '" + v.name +
                                  "' has mismatched frame and mask counts");
    }
    out << v.name << '\n';
    const fs::path images = root / "Images" / v.name;
    const fs::path annotations = root / "Annotations" / v.name;
    fs::create_directories(images);
    fs::create_directories(annotations);
    for (std::size_t f = 0; f < v.frames.size(); ++f) {
      write_ppm(images / (frame_stem(f) + ".ppm"), v.frames[f]);
      write_pgm(annotations / (frame_stem(f) + ".pgm"), v.masks[f]);
    }
  }
  if (!out) throw IoError(list, "write failed");
}

}  // namespace

void write_dataset(const std::filesystem::path& root, const Dataset& data) {
  std::filesystem::create_directories(root / "sets");
  write_split(root, "train", data.train);
  write_split(root, "test", data.test);
}

std::vector<VideoSequence> read_split(const std::filesystem::path& root,
                                      const std::string& split) {
  namespace fs = std::filesystem;
  const fs::path list = root / "sets" / (split + ".txt");
  std::ifstream in(list);
  if (!in) throw IoError(list, "cannot open split list");
  std::vector<VideoSequence> videos;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    VideoSequence v;
    v.name = line;
    v.v_id = videos.size();
    const fs::path images = root / "Images" / v.name;
    const fs::path annotations = root / "Annotations" / v.name;
    for (std::size_t f = 0;; ++f) {
      const fs::path img = images / (frame_stem(f) + ".ppm");
      if (!fs::exists(img)) break;
      v.frames.push_back(read_ppm(img));
      v.masks.push_back(read_pgm(annotations / (frame_stem(f) + ".pgm")));
      const DenseGrid& fr = v.frames.back();
      const Mask& m = v.masks.back();
      if (fr.height() != m.height() || fr.width() != m.width() ||
          fr.shape() != v.frames.front().shape()) {
        throw IoError(img, "frame size does not match its annotation or sequence");
      }
    }
    if (v.frames.size() < 2) {
      throw IoError(images, "sequence needs at least 2 frames, found " +
                                std::to_string(v.frames.size()));
    }
    videos.push_back(std::move(v));
  }
  return videos;
}

Dataset read_dataset(const std::filesystem::path& root) {
  return Dataset{read_split(root, "train"), read_split(root, "test")};
}

}  // namespace vl
