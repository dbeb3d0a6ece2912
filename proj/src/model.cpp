#include "vl/model.hpp"

#include <cmath>
#include <stdexcept>

#include "vl/random.hpp"

namespace vl {

namespace {

struct LayerSpec {
  std::string name;
  std::size_t kernel;
  std::size_t in_ch;
  std::size_t out_ch;
};

std::vector<LayerSpec> layers(const ModelConfig& cfg) {
  std::vector<LayerSpec> out;
  std::size_t in = cfg.input_channels;
  for (std::size_t i = 0; i < cfg.trunk_channels.size(); ++i) {
    out.push_back({"trunk." + std::to_string(i), 3, in, cfg.trunk_channels[i]});
    in = cfg.trunk_channels[i];
  }
  out.push_back({"pred", 1, in, 1});
  out.push_back({"video", 1, in, cfg.num_videos});
  out.push_back({"embed", 1, in, cfg.embedding_dim});
  return out;
}

Shape weight_shape(const LayerSpec& l) { return {l.kernel, l.kernel, l.in_ch * l.out_ch}; }
Shape bias_shape(const LayerSpec& l) { return {1, 1, l.out_ch}; }

}  // namespace

void validate(const ModelConfig& cfg) {
  if (cfg.input_channels < 1) throw std::invalid_argument("model: input_channels must be >= 1");
  if (cfg.num_videos < 1) throw std::invalid_argument("model: num_videos must be >= 1");
  if (cfg.embedding_dim < 1) throw std::invalid_argument("model: embedding_dim must be >= 1");
  if (cfg.trunk_channels.empty()) throw std::invalid_argument("model: trunk must have a layer");
  for (std::size_t c : cfg.trunk_channels) {
    if (c < 1) throw std::invalid_argument("model: trunk channel counts must be >= 1");
  }
}

std::string_view head_prefix(Head head) {
  switch (head) {
    case Head::Prediction: return "pred.";
    case Head::Video: return "video.";
    case Head::Embedding: return "embed.";
  }
  return "";
}

bool belongs_to(std::string_view parameter_name, Head head) {
  return parameter_name.starts_with(head_prefix(head));
}

std::map<std::string, Shape> parameter_shapes(const ModelConfig& cfg) {
  validate(cfg);
  std::map<std::string, Shape> shapes;
  for (const LayerSpec& l : layers(cfg)) {
    shapes.emplace(l.name + ".weight", weight_shape(l));
    shapes.emplace(l.name + ".bias", bias_shape(l));
  }
  return shapes;
}

ModelGraph build_model_graph(const ModelConfig& cfg, std::size_t height,
                             std::size_t width) {
  validate(cfg);
  ModelGraph m;
  diff::Graph& g = m.graph;
  m.image = g.input("image", Shape{height, width, cfg.input_channels});
  auto conv = [&g](diff::NodeId x, const LayerSpec& l) {
    const diff::NodeId w = g.parameter(l.name + ".weight", weight_shape(l));
    const diff::NodeId b = g.parameter(l.name + ".bias", bias_shape(l));
    return g.conv2d(x, w, b);
  };
  const std::vector<LayerSpec> specs = layers(cfg);
  diff::NodeId feature = m.image;
  for (std::size_t i = 0; i < cfg.trunk_channels.size(); ++i) {
    feature = g.relu(conv(feature, specs[i]));
  }
  const std::size_t heads = cfg.trunk_channels.size();
  m.pred_logits = conv(feature, specs[heads]);
  m.video_logits = conv(feature, specs[heads + 1]);
  m.embedding = conv(feature, specs[heads + 2]);
  g.set_output("pred_logits", m.pred_logits);
  g.set_output("video_logits", m.video_logits);
  g.set_output("embedding", m.embedding);
  return m;
}

Model::Model(ModelConfig cfg) : config_(std::move(cfg)) {
  validate(config_);
  Rng rng(config_.seed);
  for (const LayerSpec& l : layers(config_)) {
    const double s = 1.0 / std::sqrt(static_cast<double>(l.kernel * l.kernel * l.in_ch));
    DenseGrid w(weight_shape(l));
    for (double& v : w.values()) v = uniform_real(rng, -s, s);
    DenseGrid b(bias_shape(l));
    for (double& v : b.values()) v = uniform_real(rng, -s, s);
    parameters_.emplace(l.name + ".weight", std::move(w));
    parameters_.emplace(l.name + ".bias", std::move(b));
  }
}

Model::Model(ModelConfig cfg, ParameterSet parameters)
    : config_(std::move(cfg)), parameters_(std::move(parameters)) {
  const auto shapes = parameter_shapes(config_);
  if (shapes.size() != parameters_.size()) {
    throw std::invalid_argument("model: expected " + std::to_string(shapes.size()) +
                                " parameters, got " + std::to_string(parameters_.size()));
  }
  for (const auto& [name, shape] : shapes) {
    auto it = parameters_.find(name);
    if (it == parameters_.end()) throw std::invalid_argument("model: missing parameter '" + name + "'");
    if (it->second.shape() != shape) {
      throw std::invalid_argument("model: parameter '" + name + "' has shape " +
                                  it->second.shape().str() + ", expected " + shape.str());
    }
  }
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, grid] : parameters_) n += grid.size();
  return n;
}

HeadOutputs Model::forward(const DenseGrid& image) const {
  if (image.channels() != config_.input_channels) {
    throw std::invalid_argument("model: image has shape " + image.shape().str() +
                                ", expected " + std::to_string(config_.input_channels) +
                                " channels");
  }
  const ModelGraph m = build_model_graph(config_, image.height(), image.width());
  diff::Tape tape(m.graph);
  diff::Bindings bindings = parameters_;
  bindings.emplace("image", image);
  tape.forward(bindings);
  return {tape.value(m.pred_logits), tape.value(m.video_logits), tape.value(m.embedding)};
}

}  // namespace vl
