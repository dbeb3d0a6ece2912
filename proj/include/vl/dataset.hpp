#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vl/grid.hpp"
#include "vl/mask.hpp"

namespace vl {

struct VideoSequence {
  std::string name;
  std::size_t v_id = 0;  // index within its split
  std::vector<DenseGrid> frames;  // H x W x 3, values in [0, 1]
  std::vector<Mask> masks;
};

struct Dataset {
  std::vector<VideoSequence> train;
  std::vector<VideoSequence> test;
};

struct SynthConfig {
  std::size_t num_train_videos = 8;
  std::size_t num_test_videos = 4;
  std::size_t frames_per_video = 16;
  std::size_t image_size = 48;
  std::size_t distractor_count = 2;
  std::uint64_t seed = 0;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

void validate(const SynthConfig& cfg);

/// Distractor colors lie within this RGB distance of the target color.
inline constexpr double kDistractorColorRadius = 0.12;

/// Per-video rendering internals, for tests that need to tell objects from
/// the textured background.
struct SynthTrace {
  std::vector<DenseGrid> backgrounds;  // train videos first, then test
};

/// One target object per video (disc, rectangle or triangle) moving by a
/// random walk with occasional jumps over a static textured background, plus
/// look-alike distractors that are never labeled. Objects never overlap and
/// stay fully inside the frame.
Dataset generate_synthetic(const SynthConfig& cfg, SynthTrace* trace = nullptr);

/// <root>/Images/<video>/<NNNNN>.ppm, <root>/Annotations/<video>/<NNNNN>.pgm,
/// <root>/sets/{train,test}.txt with one video name per line. Line k of a
/// set file is the video with v_id k.
void write_dataset(const std::filesystem::path& root, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& root);
std::vector<VideoSequence> read_split(const std::filesystem::path& root,
                                      const std::string& split);

/// Zero-padded five-digit frame stem, e.g. 7 -> "00007".
std::string frame_stem(std::size_t index);

}  // namespace vl
