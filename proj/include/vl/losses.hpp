#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vl/diff/graph.hpp"
#include "vl/grid.hpp"
#include "vl/mask.hpp"
#include "vl/random.hpp"

namespace vl {

/// Probability clamp applied before every logarithm.
inline constexpr double kProbabilityEpsilon = 1e-7;

struct PairConfig {
  std::size_t samples_per_part = 256;
  double margin = 1.0;
  std::uint64_t seed = 0;
};

struct CenterConfig {
  double margin = 1.0;
};

struct MixedConfig {
  double center_weight = 1.0;  // beta_1
  double pair_weight = 1.0;    // beta_2
};

void validate(const PairConfig& cfg);
void validate(const CenterConfig& cfg);
void validate(const MixedConfig& cfg);

/// A scalar loss together with its gradient w.r.t. the loss's input grid.
/// An invalid result (degenerate mask) has value 0 and an all-zero gradient.
struct LossResult {
  double value = 0.0;
  DenseGrid gradient;
  bool valid = true;
};

/// Class-balanced binary cross entropy on a H x W x 1 logit grid. Positive
/// pixels are weighted by |Y-|/|Y|, negative pixels by 1 - |Y-|/|Y|, and the
/// per-pixel terms are summed.
LossResult weighted_bce(const DenseGrid& logits, const Mask& mask);

/// Weighted BCE on channel `video_id` of a H x W x V grid; the gradient is
/// exactly zero on every other channel.
LossResult video_loss_2d(const DenseGrid& video_logits, const Mask& mask,
                         std::size_t video_id);

struct PointSample {
  std::vector<Pixel> foreground;
  std::vector<Pixel> background;
};

/// n points from each part; without replacement when the part holds at least
/// n pixels, with replacement otherwise. An empty part yields an empty list.
PointSample sample_points(const Mask& mask, std::size_t n, std::uint64_t seed);
PointSample sample_points(const Mask& mask, std::size_t n, Rng& rng);

struct PairTerm {
  double value = 0.0;
  /// d(value)/d(first); the gradient w.r.t. the second vector is its negation.
  std::vector<double> gradient_first;
};

/// same: ||e1 - e2||; otherwise max(0, margin - ||e1 - e2||). The norm's
/// gradient at coincident points and the hinge's at its kink are taken as 0.
PairTerm pair_hinge(std::span<const double> e1, std::span<const double> e2,
                    bool same, double margin);

struct PointPair {
  Pixel first;
  Pixel second;
  bool same = true;
};

/// Sampled pairs for one frame: n foreground-foreground, n
/// background-background, then 2n foreground-background pairs, all drawn from
/// one stream seeded by cfg.seed. Empty when either part is empty.
std::vector<PointPair> plan_pairs(const Mask& mask, const PairConfig& cfg);

/// Mean pair_hinge over the planned pairs.
LossResult hd_pair_loss(const DenseGrid& embedding, const Mask& mask,
                        const PairConfig& cfg);

/// max(0, margin - ||mu+ - mu-||) with part centers taken over all pixels.
LossResult center_loss(const DenseGrid& embedding, const Mask& mask,
                       const CenterConfig& cfg);

/// beta_1 * center + beta_2 * pair, values and gradients alike.
LossResult mix_losses(const LossResult& center, const LossResult& pair,
                      const MixedConfig& mix);

/// beta_1 * center_loss + beta_2 * hd_pair_loss; valid iff both are.
LossResult mixed_loss(const DenseGrid& embedding, const Mask& mask,
                      const PairConfig& pair_cfg, const CenterConfig& center_cfg,
                      const MixedConfig& mix);

/// The same losses expressed with the differentiation engine's op set. Used
/// as a second, independent route to every value and gradient above.
namespace loss_graph {

diff::NodeId weighted_bce(diff::Graph& g, diff::NodeId logits, const Mask& mask);
diff::NodeId video_loss_2d(diff::Graph& g, diff::NodeId video_logits,
                           const Mask& mask, std::size_t video_id);
/// nullopt when either mask part is empty.
std::optional<diff::NodeId> hd_pair_loss(diff::Graph& g, diff::NodeId embedding,
                                         const Mask& mask, const PairConfig& cfg);
std::optional<diff::NodeId> center_loss(diff::Graph& g, diff::NodeId embedding,
                                        const Mask& mask, const CenterConfig& cfg);
std::optional<diff::NodeId> mixed_loss(diff::Graph& g, diff::NodeId embedding,
                                       const Mask& mask, const PairConfig& pair_cfg,
                                       const CenterConfig& center_cfg,
                                       const MixedConfig& mix);

}  // namespace loss_graph

}  // namespace vl
