#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "vl/checkpoint.hpp"
#include "vl/dataset.hpp"
#include "vl/losses.hpp"
#include "vl/metrics.hpp"
#include "vl/model.hpp"

namespace vl {

enum class LossMode { None, V2d, Vhd, Vmixed };

std::string_view to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

struct TrainConfig {
  LossMode loss_mode = LossMode::None;
  double learning_rate = 3e-6;  // tuned for the summed (not averaged) BCE
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t parent_epochs = 50;
  std::size_t finetune_iters = 200;
  double vl_weight = 1.0;  // alpha: total = bce + alpha * video loss
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;

  // Video-loss parameters. pair.seed is ignored: every frame visit derives
  // its own sampling seed from (seed, epoch, frame index).
  PairConfig pair;
  CenterConfig center;
  MixedConfig mix;

  /// Full-scale schedule: lr 1e-8, 240 parent epochs, 10k fine-tune steps.
  static TrainConfig paper_preset();

  friend bool operator==(const TrainConfig&, const TrainConfig&);
};

void validate(const TrainConfig& cfg);

struct SgdConfig {
  double learning_rate = 3e-6;  // tuned for the summed (not averaged) BCE
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

inline SgdConfig sgd_config(const TrainConfig& cfg) {
  return {cfg.learning_rate, cfg.momentum, cfg.weight_decay};
}

/// Momentum buffers keyed by parameter name; missing buffers start at zero.
struct OptimizerState {
  ParameterSet momentum;
};

/// g' = g + wd * theta; v = momentum * v + g'; theta -= lr * v.
/// Only parameters that have an entry in `grads` are touched. Throws,
/// before changing anything, if a gradient is non-finite or mis-shaped.
void sgd_step(ParameterSet& params, const diff::GradientSet& grads,
              OptimizerState& state, const SgdConfig& cfg);

/// Raised when a training step produces a non-finite loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parent-network training over every frame of the training videos. One
/// epoch is one pass over all frames in a seeded shuffled order. Resumable at
/// epoch boundaries through checkpoint() / from_checkpoint().
class ParentTrainer {
 public:
  ParentTrainer(Model model, const std::vector<VideoSequence>& videos, TrainConfig cfg);
  static ParentTrainer from_checkpoint(const Checkpoint& ckpt,
                                       const std::vector<VideoSequence>& videos,
                                       TrainConfig cfg);

  /// Runs one epoch and returns its mean per-frame total loss. On a
  /// non-finite loss, throws TrainingDiverged; the model and optimizer still
  /// hold the state before the failing step.
  double run_epoch();

  std::size_t epochs_done() const { return epochs_done_; }
  const Model& model() const { return model_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  Checkpoint checkpoint() const;

 private:
  Model model_;
  const std::vector<VideoSequence>* videos_;
  TrainConfig cfg_;
  OptimizerState optimizer_;
  std::size_t epochs_done_ = 0;
};

struct ParentResult {
  Checkpoint checkpoint;  // last good state
  std::vector<double> loss_history;  // one entry per completed epoch
  bool diverged = false;
  std::string error;
};

/// Runs cfg.parent_epochs epochs of ParentTrainer.
ParentResult train_parent(const Model& model, const std::vector<VideoSequence>& videos,
                          const TrainConfig& cfg);

/// Weighted BCE on the prediction head against one annotated frame, for
/// cfg.finetune_iters steps with fresh momentum. Video and embedding head
/// parameters stay bit-identical.
Checkpoint finetune_online(const Checkpoint& parent, const DenseGrid& first_frame,
                           const Mask& first_mask, const TrainConfig& cfg);

/// Binarized prediction: sigmoid(logit) > 0.5, strictly.
Mask binarize(const DenseGrid& pred_logits);

struct EvalOptions {
  bool skip_first = true;
  double both_empty_iou = 1.0;
};

/// Per-frame prediction masks scored by j_mean_sequence.
SequenceScore evaluate(const Model& model, const VideoSequence& video,
                       const EvalOptions& options = {});

/// Mean over frames of ||mu+ - mu-|| / ((spread+ + spread-) / 2), where the
/// spread of a part is the mean distance of its embeddings to its center.
/// Frames with an empty part are skipped.
double embedding_separation(const Model& model, const std::vector<VideoSequence>& videos);

}  // namespace vl
