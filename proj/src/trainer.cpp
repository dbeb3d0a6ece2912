#include "vl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "vl/random.hpp"

namespace vl {

std::string_view to_string(LossMode mode) {
  switch (mode) {
    case LossMode::None: return "none";
    case LossMode::V2d: return "v2d";
    case LossMode::Vhd: return "vhd";
    case LossMode::Vmixed: return "vmixed";
  }
  return "?";
}

LossMode parse_loss_mode(std::string_view text) {
  if (text == "none") return LossMode::None;
  if (text == "v2d") return LossMode::V2d;
  if (text == "vhd") return LossMode::Vhd;
  if (text == "vmixed") return LossMode::Vmixed;
  throw std::invalid_argument("unknown loss mode '" + std::string(text) +
                              "' (expected none, v2d, vhd or vmixed)");
}

TrainConfig TrainConfig::paper_preset() {
  TrainConfig cfg;
  cfg.learning_rate = 1e-8;
  cfg.parent_epochs = 240;
  cfg.finetune_iters = 10000;
  return cfg;
}

bool operator==(const TrainConfig& a, const TrainConfig& b) {
  return a.loss_mode == b.loss_mode && a.learning_rate == b.learning_rate &&
         a.momentum == b.momentum && a.weight_decay == b.weight_decay &&
         a.parent_epochs == b.parent_epochs && a.finetune_iters == b.finetune_iters &&
         a.vl_weight == b.vl_weight && a.batch_size == b.batch_size && a.seed == b.seed &&
         a.pair.samples_per_part == b.pair.samples_per_part &&
         a.pair.margin == b.pair.margin && a.pair.seed == b.pair.seed &&
         a.center.margin == b.center.margin &&
         a.mix.center_weight == b.mix.center_weight &&
         a.mix.pair_weight == b.mix.pair_weight;
}

void validate(const TrainConfig& cfg) {
  // lr = 0 is accepted: it freezes the parameters, which tests rely on.
  if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0)) {
    throw std::invalid_argument("train: momentum must lie in [0, 1)");
  }
  if (!(cfg.weight_decay >= 0.0)) throw std::invalid_argument("train: weight_decay must be >= 0");
  if (!(cfg.vl_weight >= 0.0)) throw std::invalid_argument("train: vl_weight must be >= 0");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  validate(cfg.pair);
  validate(cfg.center);
  validate(cfg.mix);
}

void sgd_step(ParameterSet& params, const diff::GradientSet& grads,
              OptimizerState& state, const SgdConfig& cfg) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw std::invalid_argument("sgd_step: unknown parameter '" + name + "'");
    if (it->second.shape() != g.shape()) {
      throw std::invalid_argument("sgd_step: gradient for '" + name + "' has shape " +
                                  g.shape().str() + ", parameter is " +
                                  it->second.shape().str());
    }
    if (!g.all_finite()) throw std::domain_error("sgd_step: non-finite gradient for '" + name + "'");
  }
  for (const auto& [name, g] : grads) {
    DenseGrid& theta = params.find(name)->second;
    auto [slot, fresh] = state.momentum.try_emplace(name, theta.shape());
    DenseGrid& v = slot->second;
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double step = g[k] + cfg.weight_decay * theta[k];
      v[k] = cfg.momentum * v[k] + step;
      theta[k] -= cfg.learning_rate * v[k];
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

struct FrameRef {
  const VideoSequence* video;
  std::size_t frame;
};

// One forward/backward over a frame. Holds the graph for the current image
// size and rebuilds it when the size changes.
class FrameStepper {
 public:
  explicit FrameStepper(const ModelConfig& cfg) : cfg_(cfg) {}

  struct Outcome {
    double loss = 0.0;
    diff::GradientSet grads;
  };

  // Total = weighted BCE on the prediction head + alpha * video loss.
  Outcome step(const ParameterSet& params, const DenseGrid& image, const Mask& mask,
               std::size_t v_id, LossMode mode, const TrainConfig& cfg,
               std::uint64_t sample_seed) {
    ensure_graph(image);
    diff::Bindings bindings = params;
    bindings.insert_or_assign("image", image);
    tape_->forward(bindings);

    LossResult bce = weighted_bce(tape_->value(graph_->pred_logits), mask);
    Outcome out;
    out.loss = bce.value;
    std::vector<diff::Seed> seeds{{graph_->pred_logits, &bce.gradient}};

    std::optional<LossResult> vl;
    diff::NodeId vl_node = graph_->video_logits;
    switch (mode) {
      case LossMode::None:
        break;
      case LossMode::V2d:
        if (v_id >= cfg_.num_videos) {
          throw std::out_of_range("train: v_id " + std::to_string(v_id) +
                                  " outside the video head's " +
                                  std::to_string(cfg_.num_videos) + " channels");
        }
        vl = video_loss_2d(tape_->value(graph_->video_logits), mask, v_id);
        break;
      case LossMode::Vhd: {
        PairConfig pair = cfg.pair;
        pair.seed = sample_seed;
        vl = hd_pair_loss(tape_->value(graph_->embedding), mask, pair);
        vl_node = graph_->embedding;
        break;
      }
      case LossMode::Vmixed: {
        PairConfig pair = cfg.pair;
        pair.seed = sample_seed;
        vl = mixed_loss(tape_->value(graph_->embedding), mask, pair, cfg.center, cfg.mix);
        vl_node = graph_->embedding;
        break;
      }
    }
    if (vl && vl->valid) {
      out.loss += cfg.vl_weight * vl->value;
      for (double& g : vl->gradient.values()) g *= cfg.vl_weight;
      seeds.push_back({vl_node, &vl->gradient});
    }
    if (!std::isfinite(out.loss)) return out;
    out.grads = tape_->backward(seeds);
    out.grads.erase("image");
    return out;
  }

  const ModelGraph& graph_for(const DenseGrid& image) {
    ensure_graph(image);
    return *graph_;
  }
  diff::Tape& tape() { return *tape_; }

 private:
  void ensure_graph(const DenseGrid& image) {
    if (graph_ && graph_->graph.node(graph_->image).shape == image.shape()) return;
    tape_.reset();
    graph_ = std::make_unique<ModelGraph>(
        build_model_graph(cfg_, image.height(), image.width()));
    tape_ = std::make_unique<diff::Tape>(graph_->graph);
  }

  ModelConfig cfg_;
  std::unique_ptr<ModelGraph> graph_;
  std::unique_ptr<diff::Tape> tape_;
};

void add_into(diff::GradientSet& acc, diff::GradientSet&& g) {
  if (acc.empty()) {
    acc = std::move(g);
    return;
  }
  for (auto& [name, grid] : g) {
    DenseGrid& dst = acc.at(name);
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += grid[k];
  }
}

}  // namespace

ParentTrainer::ParentTrainer(Model model, const std::vector<VideoSequence>& videos,
                             TrainConfig cfg)
    : model_(std::move(model)), videos_(&videos), cfg_(std::move(cfg)) {
  validate(cfg_);
  if (videos.empty()) throw std::invalid_argument("train: no training videos");
  for (const VideoSequence& v : videos) {
    if (v.v_id >= model_.config().num_videos) {
      throw std::out_of_range("train: video '" + v.name + "' has v_id " +
                              std::to_string(v.v_id) + " but the model has " +
                              std::to_string(model_.config().num_videos) +
                              " video channels");
    }
  }
}

ParentTrainer ParentTrainer::from_checkpoint(const Checkpoint& ckpt,
                                             const std::vector<VideoSequence>& videos,
                                             TrainConfig cfg) {
  ParentTrainer t(ckpt.to_model(), videos, std::move(cfg));
  t.optimizer_.momentum = ckpt.momentum;
  auto it = ckpt.metadata.find("epoch");
  if (it != ckpt.metadata.end()) t.epochs_done_ = std::stoull(it->second);
  return t;
}

double ParentTrainer::run_epoch() {
  std::vector<FrameRef> frames;
  for (const VideoSequence& v : *videos_) {
    for (std::size_t f = 0; f < v.frames.size(); ++f) frames.push_back({&v, f});
  }
  std::vector<std::size_t> order(frames.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffle_rng(derive_seed({cfg_.seed, epochs_done_, 0x5eedULL}));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[uniform_index(shuffle_rng, i)]);
  }

  FrameStepper stepper(model_.config());
  const SgdConfig sgd = sgd_config(cfg_);
  std::vector<double> losses(frames.size(), 0.0);
  diff::GradientSet batch;
  std::size_t in_batch = 0;
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const std::size_t idx = order[pos];
    const FrameRef& fr = frames[idx];
    const std::uint64_t sample_seed = derive_seed({cfg_.seed, epochs_done_, idx});
    auto out = stepper.step(model_.parameters(), fr.video->frames[fr.frame],
                            fr.video->masks[fr.frame], fr.video->v_id, cfg_.loss_mode,
                            cfg_, sample_seed);
    if (!std::isfinite(out.loss)) {
      throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epochs_done_ + 1) +
                             ", video '" + fr.video->name + "' frame " +
                             std::to_string(fr.frame));
    }
    losses[idx] = out.loss;
    add_into(batch, std::move(out.grads));
    if (++in_batch == cfg_.batch_size || pos + 1 == order.size()) {
      sgd_step(model_.parameters(), batch, optimizer_, sgd);
      batch.clear();
      in_batch = 0;
    }
  }
  ++epochs_done_;
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / static_cast<double>(losses.size());
}

Checkpoint ParentTrainer::checkpoint() const {
  Checkpoint ckpt;
  ckpt.model = model_.config();
  ckpt.parameters = model_.parameters();
  ckpt.momentum = optimizer_.momentum;
  ckpt.metadata["phase"] = "parent";
  ckpt.metadata["epoch"] = std::to_string(epochs_done_);
  ckpt.metadata["seed"] = std::to_string(cfg_.seed);
  ckpt.metadata["loss_mode"] = std::string(to_string(cfg_.loss_mode));
  return ckpt;
}

ParentResult train_parent(const Model& model, const std::vector<VideoSequence>& videos,
                          const TrainConfig& cfg) {
  ParentTrainer trainer(model, videos, cfg);
  ParentResult result;
  try {
    while (trainer.epochs_done() < cfg.parent_epochs) {
      result.loss_history.push_back(trainer.run_epoch());
    }
  } catch (const TrainingDiverged& e) {
    result.diverged = true;
    result.error = e.what();
  }
  result.checkpoint = trainer.checkpoint();
  return result;
}

Checkpoint finetune_online(const Checkpoint& parent, const DenseGrid& first_frame,
                           const Mask& first_mask, const TrainConfig& cfg) {
  validate(cfg);
  if (first_mask.foreground_count() == 0) {
    throw std::invalid_argument("finetune: first-frame annotation has no foreground");
  }
  Model model = parent.to_model();
  OptimizerState optimizer;
  FrameStepper stepper(model.config());
  const SgdConfig sgd = sgd_config(cfg);
  for (std::size_t it = 0; it < cfg.finetune_iters; ++it) {
    auto out = stepper.step(model.parameters(), first_frame, first_mask, 0,
                            LossMode::None, cfg, 0);
    if (!std::isfinite(out.loss)) {
      throw TrainingDiverged("non-finite loss at fine-tune iteration " + std::to_string(it));
    }
    std::erase_if(out.grads, [](const auto& kv) {
      return belongs_to(kv.first, Head::Video) || belongs_to(kv.first, Head::Embedding);
    });
    sgd_step(model.parameters(), out.grads, optimizer, sgd);
  }
  Checkpoint ckpt;
  ckpt.model = model.config();
  ckpt.parameters = model.parameters();
  ckpt.momentum = optimizer.momentum;
  ckpt.metadata = parent.metadata;
  ckpt.metadata["phase"] = "finetune";
  ckpt.metadata["finetune_iters"] = std::to_string(cfg.finetune_iters);
  return ckpt;
}

Mask binarize(const DenseGrid& pred_logits) {
  Mask m(pred_logits.height(), pred_logits.width());
  for (std::size_t r = 0; r < m.height(); ++r) {
    for (std::size_t c = 0; c < m.width(); ++c) {
      const double z = pred_logits.at(r, c, 0);
      const double p = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      m.set(r, c, p > 0.5);
    }
  }
  return m;
}

namespace {

template <typename Fn>
void for_each_frame_output(const Model& model, const VideoSequence& video, Fn&& fn) {
  FrameStepper stepper(model.config());
  for (std::size_t f = 0; f < video.frames.size(); ++f) {
    const DenseGrid& image = video.frames[f];
    if (image.channels() != model.config().input_channels) {
      throw std::invalid_argument("evaluate: frame " + std::to_string(f) + " of '" +
                                  video.name + "' has shape " + image.shape().str());
    }
    const ModelGraph& mg = stepper.graph_for(image);
    diff::Bindings bindings = model.parameters();
    bindings.insert_or_assign("image", image);
    stepper.tape().forward(bindings);
    fn(f, stepper.tape(), mg);
  }
}

}  // namespace

SequenceScore evaluate(const Model& model, const VideoSequence& video,
                       const EvalOptions& options) {
  std::vector<Mask> preds;
  for_each_frame_output(model, video, [&](std::size_t, const diff::Tape& tape, const ModelGraph& mg) {
    preds.push_back(binarize(tape.value(mg.pred_logits)));
  });
  return j_mean_sequence(preds, video.masks, options.skip_first, video.name,
                         options.both_empty_iou);
}

double embedding_separation(const Model& model, const std::vector<VideoSequence>& videos) {
  double total = 0.0;
  std::size_t frames = 0;
  for (const VideoSequence& v : videos) {
    for_each_frame_output(model, v, [&](std::size_t f, const diff::Tape& tape, const ModelGraph& mg) {
      const DenseGrid& e = tape.value(mg.embedding);
      const Mask& mask = v.masks[f];
      const std::size_t fg = mask.foreground_count();
      const std::size_t bg = mask.size() - fg;
      if (fg == 0 || bg == 0) return;
      const std::size_t d = e.channels();
      std::vector<double> mu_fg(d, 0.0), mu_bg(d, 0.0);
      for (std::size_t p = 0; p < mask.size(); ++p) {
        auto& mu = mask[p] ? mu_fg : mu_bg;
        for (std::size_t k = 0; k < d; ++k) mu[k] += e[p * d + k];
      }
      double between = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        mu_fg[k] /= static_cast<double>(fg);
        mu_bg[k] /= static_cast<double>(bg);
        between += (mu_fg[k] - mu_bg[k]) * (mu_fg[k] - mu_bg[k]);
      }
      double spread_fg = 0.0, spread_bg = 0.0;
      for (std::size_t p = 0; p < mask.size(); ++p) {
        const auto& mu = mask[p] ? mu_fg : mu_bg;
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) sq += (e[p * d + k] - mu[k]) * (e[p * d + k] - mu[k]);
        (mask[p] ? spread_fg : spread_bg) += std::sqrt(sq);
      }
      const double spread = 0.5 * (spread_fg / static_cast<double>(fg) +
                                   spread_bg / static_cast<double>(bg));
      total += std::sqrt(between) / std::max(spread, 1e-12);
      ++frames;
    });
  }
  if (frames == 0) throw std::invalid_argument("embedding_separation: no frame has both parts");
  return total / static_cast<double>(frames);
}

}  // namespace vl
