#include "vl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vl {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_spatial(const DenseGrid& grid, const Mask& mask, const char* who) {
  if (grid.height() != mask.height() || grid.width() != mask.width()) {
    throw std::invalid_argument(std::string(who) + ": grid " + grid.shape().str() +
                                " does not match mask " +
                                std::to_string(mask.height()) + "x" +
                                std::to_string(mask.width()));
  }
}

LossResult invalid_result(const Shape& shape) {
  return LossResult{0.0, DenseGrid(shape), false};
}

std::vector<Pixel> draw(std::vector<Pixel> part, std::size_t n, Rng& rng) {
  if (part.empty()) return part;
  if (part.size() >= n) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + uniform_index(rng, part.size() - i);
      std::swap(part[i], part[j]);
    }
    part.resize(n);
    return part;
  }
  std::vector<Pixel> out(n);
  for (auto& p : out) p = part[uniform_index(rng, part.size())];
  return out;
}

}  // namespace

void validate(const PairConfig& cfg) {
  if (cfg.samples_per_part < 1) throw std::invalid_argument("PairConfig: n must be >= 1");
  if (!(cfg.margin >= 0.0)) throw std::invalid_argument("PairConfig: margin must be >= 0");
}

void validate(const CenterConfig& cfg) {
  if (!(cfg.margin >= 0.0)) throw std::invalid_argument("CenterConfig: margin must be >= 0");
}

void validate(const MixedConfig& cfg) {
  if (!(cfg.center_weight >= 0.0) || !(cfg.pair_weight >= 0.0)) {
    throw std::invalid_argument("MixedConfig: weights must be >= 0");
  }
  if (cfg.center_weight == 0.0 && cfg.pair_weight == 0.0) {
    throw std::invalid_argument("MixedConfig: weights must not both be zero");
  }
}

// ---------------------------------------------------------------------------

LossResult weighted_bce(const DenseGrid& logits, const Mask& mask) {
  check_spatial(logits, mask, "weighted_bce");
  if (logits.channels() != 1) {
    throw std::invalid_argument("weighted_bce: expected one channel, got " +
                                logits.shape().str());
  }
  const double total = static_cast<double>(mask.size());
  const double pos_weight = static_cast<double>(mask.background_count()) / total;
  const double neg_weight = 1.0 - pos_weight;
  constexpr double lo = kProbabilityEpsilon;
  constexpr double hi = 1.0 - kProbabilityEpsilon;

  LossResult result{0.0, DenseGrid(logits.shape()), true};
  double pos_sum = 0.0;
  double neg_sum = 0.0;
  for (std::size_t j = 0; j < mask.size(); ++j) {
    const double p = sigmoid(logits[j]);
    const bool inside = p >= lo && p <= hi;
    const double pc = std::clamp(p, lo, hi);
    if (mask[j]) {
      pos_sum += std::log(pc);
      result.gradient[j] = inside ? -pos_weight * (1.0 - pc) : 0.0;
    } else {
      neg_sum += std::log(1.0 - pc);
      result.gradient[j] = inside ? neg_weight * pc : 0.0;
    }
  }
  result.value -= pos_weight * pos_sum;
  result.value -= neg_weight * neg_sum;
  return result;
}

LossResult video_loss_2d(const DenseGrid& video_logits, const Mask& mask,
                         std::size_t video_id) {
  check_spatial(video_logits, mask, "video_loss_2d");
  const std::size_t channels = video_logits.channels();
  if (video_id >= channels) {
    throw std::out_of_range("video_loss_2d: video id " + std::to_string(video_id) +
                            " outside [0, " + std::to_string(channels) + ")");
  }
  DenseGrid selected(video_logits.height(), video_logits.width(), 1);
  for (std::size_t p = 0; p < selected.size(); ++p) {
    selected[p] = video_logits[p * channels + video_id];
  }
  LossResult channel = weighted_bce(selected, mask);
  LossResult result{channel.value, DenseGrid(video_logits.shape()), true};
  for (std::size_t p = 0; p < selected.size(); ++p) {
    result.gradient[p * channels + video_id] = channel.gradient[p];
  }
  return result;
}

// ---------------------------------------------------------------------------

PointSample sample_points(const Mask& mask, std::size_t n, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_points: n must be >= 1");
  PointSample s;
  s.foreground = draw(mask.foreground(), n, rng);
  s.background = draw(mask.background(), n, rng);
  return s;
}

PointSample sample_points(const Mask& mask, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  return sample_points(mask, n, rng);
}

PairTerm pair_hinge(std::span<const double> e1, std::span<const double> e2,
                    bool same, double margin) {
  if (e1.size() != e2.size()) {
    throw std::invalid_argument("pair_hinge: dimension " + std::to_string(e1.size()) +
                                " vs " + std::to_string(e2.size()));
  }
  PairTerm term{0.0, std::vector<double>(e1.size(), 0.0)};
  double sq = 0.0;
  for (std::size_t k = 0; k < e1.size(); ++k) {
    const double d = e1[k] - e2[k];
    sq += d * d;
  }
  const double dist = std::sqrt(sq);
  double slope = 0.0;
  if (same) {
    term.value = dist;
    slope = 1.0;
  } else if (margin - dist > 0.0) {
    term.value = margin - dist;
    slope = -1.0;
  }
  if (slope != 0.0 && dist > 0.0) {
    for (std::size_t k = 0; k < e1.size(); ++k) {
      term.gradient_first[k] = slope * (e1[k] - e2[k]) / dist;
    }
  }
  return term;
}

std::vector<PointPair> plan_pairs(const Mask& mask, const PairConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const PointSample s = sample_points(mask, cfg.samples_per_part, rng);
  if (s.foreground.empty() || s.background.empty()) return {};
  const std::size_t n = cfg.samples_per_part;
  std::vector<PointPair> pairs;
  pairs.reserve(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    pairs.push_back({s.foreground[i], s.foreground[uniform_index(rng, n)], true});
  }
  for (std::size_t i = 0; i < n; ++i) {
    pairs.push_back({s.background[i], s.background[uniform_index(rng, n)], true});
  }
  for (std::size_t k = 0; k < 2 * n; ++k) {
    pairs.push_back({s.foreground[k % n], s.background[uniform_index(rng, n)], false});
  }
  return pairs;
}

LossResult hd_pair_loss(const DenseGrid& embedding, const Mask& mask,
                        const PairConfig& cfg) {
  check_spatial(embedding, mask, "hd_pair_loss");
  const std::vector<PointPair> pairs = plan_pairs(mask, cfg);
  if (pairs.empty()) return invalid_result(embedding.shape());

  const double inv = 1.0 / static_cast<double>(pairs.size());
  LossResult result{0.0, DenseGrid(embedding.shape()), true};
  double total = 0.0;
  for (const PointPair& pair : pairs) {
    const auto a = embedding.pixel(pair.first.row, pair.first.col);
    const auto b = embedding.pixel(pair.second.row, pair.second.col);
    const PairTerm term = pair_hinge(a, b, pair.same, cfg.margin);
    total += term.value;
    auto ga = result.gradient.pixel(pair.first.row, pair.first.col);
    for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += inv * term.gradient_first[k];
    auto gb = result.gradient.pixel(pair.second.row, pair.second.col);
    for (std::size_t k = 0; k < gb.size(); ++k) gb[k] -= inv * term.gradient_first[k];
  }
  result.value = total / static_cast<double>(pairs.size());
  return result;
}

LossResult center_loss(const DenseGrid& embedding, const Mask& mask,
                       const CenterConfig& cfg) {
  check_spatial(embedding, mask, "center_loss");
  validate(cfg);
  const std::size_t fg_count = mask.foreground_count();
  const std::size_t bg_count = mask.size() - fg_count;
  if (fg_count == 0 || bg_count == 0) return invalid_result(embedding.shape());

  const std::size_t dims = embedding.channels();
  std::vector<double> fg_center(dims, 0.0);
  std::vector<double> bg_center(dims, 0.0);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    auto& center = mask[p] ? fg_center : bg_center;
    for (std::size_t k = 0; k < dims; ++k) center[k] += embedding[p * dims + k];
  }
  std::vector<double> diff(dims);
  double sq = 0.0;
  for (std::size_t k = 0; k < dims; ++k) {
    fg_center[k] /= static_cast<double>(fg_count);
    bg_center[k] /= static_cast<double>(bg_count);
    diff[k] = fg_center[k] - bg_center[k];
    sq += diff[k] * diff[k];
  }
  const double dist = std::sqrt(sq);

  LossResult result{0.0, DenseGrid(embedding.shape()), true};
  if (!(cfg.margin - dist > 0.0)) return result;
  result.value = cfg.margin - dist;
  if (dist == 0.0) return result;

  const double fg_scale = -1.0 / (dist * static_cast<double>(fg_count));
  const double bg_scale = 1.0 / (dist * static_cast<double>(bg_count));
  for (std::size_t p = 0; p < mask.size(); ++p) {
    const double s = mask[p] ? fg_scale : bg_scale;
    for (std::size_t k = 0; k < dims; ++k) result.gradient[p * dims + k] = s * diff[k];
  }
  return result;
}

LossResult mix_losses(const LossResult& center, const LossResult& pair,
                      const MixedConfig& m) {
  validate(m);
  if (!center.valid || !pair.valid) return invalid_result(center.gradient.shape());
  LossResult out{m.center_weight * center.value + m.pair_weight * pair.value,
                 DenseGrid(center.gradient.shape()), true};
  for (std::size_t k = 0; k < out.gradient.size(); ++k) {
    out.gradient[k] = m.center_weight * center.gradient[k] +
                      m.pair_weight * pair.gradient[k];
  }
  return out;
}

LossResult mixed_loss(const DenseGrid& embedding, const Mask& mask,
                      const PairConfig& pair_cfg, const CenterConfig& center_cfg,
                      const MixedConfig& mix_cfg) {
  return mix_losses(center_loss(embedding, mask, center_cfg),
             hd_pair_loss(embedding, mask, pair_cfg), mix_cfg);
}

// ---------------------------------------------------------------------------

namespace loss_graph {

using diff::Graph;
using diff::NodeId;

namespace {

void check_node(const Graph& g, NodeId id, const Mask& mask, const char* who) {
  const Shape& s = g.node(id).shape;
  if (s.height != mask.height() || s.width != mask.width()) {
    throw std::invalid_argument(std::string(who) + ": node " + g.describe(id) +
                                " has shape " + s.str() + ", mask is " +
                                std::to_string(mask.height()) + "x" +
                                std::to_string(mask.width()));
  }
}

}  // namespace

NodeId weighted_bce(Graph& g, NodeId logits, const Mask& mask) {
  check_node(g, logits, mask, "weighted_bce");
  const std::vector<Pixel> fg = mask.foreground();
  const std::vector<Pixel> bg = mask.background();
  const double pos_weight =
      static_cast<double>(bg.size()) / static_cast<double>(mask.size());
  const double neg_weight = 1.0 - pos_weight;

  std::optional<NodeId> pos;
  std::optional<NodeId> neg;
  if (!fg.empty()) {
    const NodeId logp = g.clamped_log(g.sigmoid(g.gather(logits, fg)), kProbabilityEpsilon);
    pos = g.scale(g.sum(logp), -pos_weight);
  }
  if (!bg.empty()) {
    const NodeId flipped = g.scale(g.gather(logits, bg), -1.0);
    const NodeId log1mp = g.clamped_log(g.sigmoid(flipped), kProbabilityEpsilon);
    neg = g.scale(g.sum(log1mp), -neg_weight);
  }
  if (pos && neg) return g.add(*pos, *neg);
  return pos ? *pos : *neg;
}

NodeId video_loss_2d(Graph& g, NodeId video_logits, const Mask& mask,
                     std::size_t video_id) {
  return weighted_bce(g, g.channel_select(video_logits, video_id), mask);
}

std::optional<NodeId> hd_pair_loss(Graph& g, NodeId embedding, const Mask& mask,
                                   const PairConfig& cfg) {
  check_node(g, embedding, mask, "hd_pair_loss");
  const std::vector<PointPair> pairs = plan_pairs(mask, cfg);
  if (pairs.empty()) return std::nullopt;
  std::vector<Pixel> pos_a, pos_b, neg_a, neg_b;
  for (const PointPair& p : pairs) {
    (p.same ? pos_a : neg_a).push_back(p.first);
    (p.same ? pos_b : neg_b).push_back(p.second);
  }
  const NodeId pos_dist = g.norm(
      g.subtract(g.gather(embedding, std::move(pos_a)), g.gather(embedding, std::move(pos_b))));
  const NodeId neg_dist = g.norm(
      g.subtract(g.gather(embedding, std::move(neg_a)), g.gather(embedding, std::move(neg_b))));
  const NodeId total = g.add(g.sum(pos_dist), g.sum(g.hinge(neg_dist, cfg.margin)));
  return g.scale(total, 1.0 / static_cast<double>(pairs.size()));
}

std::optional<NodeId> center_loss(Graph& g, NodeId embedding, const Mask& mask,
                                  const CenterConfig& cfg) {
  check_node(g, embedding, mask, "center_loss");
  validate(cfg);
  std::vector<Pixel> fg = mask.foreground();
  std::vector<Pixel> bg = mask.background();
  if (fg.empty() || bg.empty()) return std::nullopt;
  const NodeId fg_center = g.mean(g.gather(embedding, std::move(fg)));
  const NodeId bg_center = g.mean(g.gather(embedding, std::move(bg)));
  return g.hinge(g.norm(g.subtract(fg_center, bg_center)), cfg.margin);
}

std::optional<NodeId> mixed_loss(Graph& g, NodeId embedding, const Mask& mask,
                                 const PairConfig& pair_cfg,
                                 const CenterConfig& center_cfg,
                                 const MixedConfig& mix_cfg) {
  validate(mix_cfg);
  const auto center = center_loss(g, embedding, mask, center_cfg);
  const auto pair = hd_pair_loss(g, embedding, mask, pair_cfg);
  if (!center || !pair) return std::nullopt;
  return g.add(g.scale(*center, mix_cfg.center_weight),
               g.scale(*pair, mix_cfg.pair_weight));
}

}  // namespace loss_graph

}  // namespace vl
