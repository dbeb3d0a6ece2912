#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "vl/diff/graph.hpp"
#include "vl/grid.hpp"

namespace vl {

struct ModelConfig {
  std::size_t input_channels = 3;
  std::vector<std::size_t> trunk_channels{8, 16, 16};  // 3x3 conv + rectifier each
  std::size_t num_videos = 8;                          // video-identity head width
  std::size_t embedding_dim = 20;
  std::uint64_t seed = 0;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void validate(const ModelConfig& cfg);

using ParameterSet = diff::Bindings;

enum class Head { Prediction, Video, Embedding };

/// Name prefix of a head's private parameters ("pred.", "video.", "embed.").
std::string_view head_prefix(Head head);
bool belongs_to(std::string_view parameter_name, Head head);

struct HeadOutputs {
  DenseGrid pred_logits;   // H x W x 1
  DenseGrid video_logits;  // H x W x V
  DenseGrid embedding;     // H x W x D
};

/// The network as a graph over one image size. The input leaf is named
/// "image"; every other leaf is a parameter.
struct ModelGraph {
  diff::Graph graph;
  diff::NodeId image;
  diff::NodeId pred_logits;
  diff::NodeId video_logits;
  diff::NodeId embedding;
};

ModelGraph build_model_graph(const ModelConfig& cfg, std::size_t height,
                             std::size_t width);

/// Declared shape of every parameter, keyed by name.
std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg);

/// Fully convolutional network: a stride-1 trunk of 3x3 conv + rectifier
/// blocks, then three parallel 1x1 convolution heads on the last trunk
/// feature.
class Model {
 public:
  /// Parameters drawn uniformly from [-s, s], s = 1/sqrt(fan_in), from a
  /// generator seeded with cfg.seed.
  explicit Model(ModelConfig cfg);
  Model(ModelConfig cfg, ParameterSet parameters);

  const ModelConfig& config() const { return config_; }
  const ParameterSet& parameters() const { return parameters_; }
  ParameterSet& parameters() { return parameters_; }
  std::size_t parameter_count() const;

  HeadOutputs forward(const DenseGrid& image) const;

 private:
  ModelConfig config_;
  ParameterSet parameters_;
};

inline Model build_model(const ModelConfig& cfg) { return Model(cfg); }
inline HeadOutputs forward(const Model& model, const DenseGrid& image) {
  return model.forward(image);
}

}  // namespace vl
