#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>

#include "vl/diff/graph.hpp"
#include "vl/losses.hpp"
#include "vl/random.hpp"

using namespace vl;

namespace {

const double kLn2 = std::log(2.0);

// 2x2 mask with one foreground pixel.
Mask one_of_four() { return Mask(2, 2, {1, 0, 0, 0}); }

Mask random_mask(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> labels(h * w);
  for (auto& l : labels) l = uniform_real(rng, 0.0, 1.0) < 0.4;
  labels[0] = 1;
  labels[1] = 0;
  return Mask(h, w, labels);
}

DenseGrid random_grid(Shape s, std::uint64_t seed, double scale) {
  Rng rng(seed);
  DenseGrid g(s);
  for (double& v : g.values()) v = uniform_real(rng, -scale, scale);
  return g;
}

// Value and gradient of a loss rebuilt from graph ops.
std::pair<double, DenseGrid> via_graph(const DenseGrid& x, auto&& build) {
  diff::Graph g;
  const diff::NodeId in = g.input("x", x.shape());
  const diff::NodeId out = build(g, in);
  diff::Tape tape(g);
  tape.forward({{"x", x}});
  return {tape.value(out).item(), tape.backward(out).at("x")};
}

void check_matches_graph(const LossResult& r, const std::pair<double, DenseGrid>& g) {
  CHECK(r.value == doctest::Approx(g.first).epsilon(1e-12));
  CHECK(max_abs_diff(r.gradient, g.second) < 1e-12);
}

}  // namespace

TEST_CASE("weighted_bce: one foreground pixel of four at p = 0.5") {
  const LossResult r = weighted_bce(DenseGrid(2, 2, 1, 0.0), one_of_four());
  CHECK(std::abs(r.value - 1.5 * kLn2) < 1e-12);
  CHECK(r.valid);
}

TEST_CASE("weighted_bce: confident correct prediction is essentially free") {
  const Mask m = one_of_four();
  DenseGrid logits(2, 2, 1, -40.0);
  logits[0] = 40.0;
  const LossResult r = weighted_bce(logits, m);
  CHECK(r.value <= 4.0 * -std::log(1.0 - kProbabilityEpsilon) + 1e-15);
  CHECK(r.value >= 0.0);
}

TEST_CASE("weighted_bce: balanced mask is symmetric under label flip and logit negation") {
  const Mask m(2, 2, {1, 0, 1, 0});
  Mask flipped(2, 2, {0, 1, 0, 1});
  const DenseGrid z = random_grid({2, 2, 1}, 4, 3.0);
  DenseGrid neg = z;
  for (double& v : neg.values()) v = -v;
  CHECK(weighted_bce(z, m).value == doctest::Approx(weighted_bce(neg, flipped).value).epsilon(1e-14));
}

TEST_CASE("weighted_bce: degenerate masks stay valid and finite") {
  const DenseGrid z = random_grid({3, 3, 1}, 5, 2.0);
  for (bool fill : {true, false}) {
    const LossResult r = weighted_bce(z, Mask(3, 3, fill));
    CHECK(r.valid);
    CHECK(std::isfinite(r.value));
    CHECK(r.gradient.all_finite());
  }
  CHECK_THROWS(weighted_bce(DenseGrid(2, 2, 2), one_of_four()));
}

TEST_CASE("weighted_bce agrees with its graph twin") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Mask m = random_mask(5, 6, seed);
    const DenseGrid z = random_grid({5, 6, 1}, seed + 50, 3.0);
    check_matches_graph(weighted_bce(z, m), via_graph(z, [&](diff::Graph& g, diff::NodeId x) {
                          return loss_graph::weighted_bce(g, x, m);
                        }));
  }
}

TEST_CASE("video_loss_2d: selects one channel") {
  const Mask m = one_of_four();
  DenseGrid v = random_grid({2, 2, 3}, 7, 2.0);
  for (std::size_t p = 0; p < 4; ++p) v[p * 3 + 1] = 0.0;
  const LossResult r = video_loss_2d(v, m, 1);
  CHECK(std::abs(r.value - 1.5 * kLn2) < 1e-12);
  for (std::size_t p = 0; p < 4; ++p) {
    CHECK(r.gradient[p * 3 + 0] == 0.0);
    CHECK(r.gradient[p * 3 + 2] == 0.0);
    CHECK(r.gradient[p * 3 + 1] != 0.0);
  }

  DenseGrid other = v;
  for (std::size_t p = 0; p < 4; ++p) {
    other[p * 3 + 0] += 11.0;
    other[p * 3 + 2] -= 5.0;
  }
  const LossResult r2 = video_loss_2d(other, m, 1);
  CHECK(std::memcmp(&r.value, &r2.value, sizeof(double)) == 0);

  CHECK_THROWS_AS(video_loss_2d(v, m, 3), std::out_of_range);
}

TEST_CASE("video_loss_2d with V = 1 is weighted_bce") {
  const Mask m = random_mask(4, 4, 9);
  const DenseGrid z = random_grid({4, 4, 1}, 10, 2.0);
  const LossResult a = video_loss_2d(z, m, 0);
  const LossResult b = weighted_bce(z, m);
  CHECK(std::memcmp(&a.value, &b.value, sizeof(double)) == 0);
  CHECK(a.gradient.bit_equal(b.gradient));
}

TEST_CASE("video_loss_2d agrees with its graph twin") {
  const Mask m = random_mask(4, 5, 11);
  const DenseGrid z = random_grid({4, 5, 4}, 12, 2.0);
  check_matches_graph(video_loss_2d(z, m, 2), via_graph(z, [&](diff::Graph& g, diff::NodeId x) {
                        return loss_graph::video_loss_2d(g, x, m, 2);
                      }));
}

TEST_CASE("sample_points: without replacement when the part is large enough") {
  std::vector<std::uint8_t> labels(40 * 40, 0);
  std::fill(labels.begin(), labels.begin() + 1000, 1);
  const Mask m(40, 40, labels);
  const PointSample s = sample_points(m, 256, 3);
  REQUIRE(s.foreground.size() == 256);
  std::set<std::pair<std::size_t, std::size_t>> distinct;
  for (const Pixel& p : s.foreground) {
    CHECK(m.at(p.row, p.col));
    distinct.insert({p.row, p.col});
  }
  CHECK(distinct.size() == 256);
  CHECK(s.background.size() == 256);
  for (const Pixel& p : s.background) CHECK_FALSE(m.at(p.row, p.col));
}

TEST_CASE("sample_points: with replacement from a small part") {
  std::vector<std::uint8_t> labels(20 * 20, 0);
  std::fill(labels.begin(), labels.begin() + 10, 1);
  const Mask m(20, 20, labels);
  const PointSample s = sample_points(m, 256, 4);
  REQUIRE(s.foreground.size() == 256);
  for (const Pixel& p : s.foreground) CHECK(m.at(p.row, p.col));

  const PointSample again = sample_points(m, 256, 4);
  CHECK(again.foreground == s.foreground);
  CHECK(again.background == s.background);

  CHECK(sample_points(Mask(3, 3, false), 5, 1).foreground.empty());
}

TEST_CASE("pair_hinge: 3-4-5 cases") {
  const double e1[] = {0.0, 0.0};
  const double e2[] = {3.0, 4.0};
  const PairTerm same = pair_hinge(e1, e2, true, 1.0);
  CHECK(same.value == 5.0);
  CHECK(same.gradient_first[0] == doctest::Approx(-0.6));
  CHECK(same.gradient_first[1] == doctest::Approx(-0.8));

  const PairTerm active = pair_hinge(e1, e2, false, 6.0);
  CHECK(active.value == 1.0);
  CHECK(active.gradient_first[0] == doctest::Approx(0.6));

  const PairTerm dead = pair_hinge(e1, e2, false, 4.0);
  CHECK(dead.value == 0.0);
  CHECK(dead.gradient_first[0] == 0.0);
  CHECK(dead.gradient_first[1] == 0.0);

  const PairTerm coincident = pair_hinge(e1, e1, true, 1.0);
  CHECK(coincident.value == 0.0);
  CHECK(coincident.gradient_first[0] == 0.0);

  const double e3[] = {1.0, 2.0, 3.0};
  CHECK_THROWS(pair_hinge(e1, e3, true, 1.0));
}

TEST_CASE("plan_pairs: n positive pairs per part and 2n negative pairs") {
  const Mask m = random_mask(8, 8, 13);
  PairConfig cfg;
  cfg.samples_per_part = 16;
  cfg.seed = 5;
  const auto pairs = plan_pairs(m, cfg);
  REQUIRE(pairs.size() == 64);
  for (std::size_t i = 0; i < 16; ++i) {
    CHECK(pairs[i].same);
    CHECK(m.at(pairs[i].first.row, pairs[i].first.col));
    CHECK(m.at(pairs[i].second.row, pairs[i].second.col));
  }
  for (std::size_t i = 16; i < 32; ++i) {
    CHECK(pairs[i].same);
    CHECK_FALSE(m.at(pairs[i].first.row, pairs[i].first.col));
  }
  for (std::size_t i = 32; i < 64; ++i) {
    CHECK_FALSE(pairs[i].same);
    CHECK(m.at(pairs[i].first.row, pairs[i].first.col) !=
          m.at(pairs[i].second.row, pairs[i].second.col));
  }
}

TEST_CASE("hd_pair_loss: constant field, separated clusters, degenerate mask") {
  const Mask m = random_mask(6, 6, 14);
  PairConfig cfg;
  cfg.samples_per_part = 16;

  const LossResult constant = hd_pair_loss(DenseGrid(6, 6, 3, 0.25), m, cfg);
  CHECK(constant.value == 0.5);
  CHECK(constant.valid);

  DenseGrid clusters(6, 6, 3, 0.0);
  for (std::size_t r = 0; r < 6; ++r) {
    for (std::size_t c = 0; c < 6; ++c) {
      if (m.at(r, c)) clusters.at(r, c, 0) = 10.0;
    }
  }
  const LossResult separated = hd_pair_loss(clusters, m, cfg);
  CHECK(separated.value == 0.0);
  for (double g : separated.gradient.values()) CHECK(g == 0.0);

  const LossResult degenerate = hd_pair_loss(clusters, Mask(6, 6, true), cfg);
  CHECK_FALSE(degenerate.valid);
  CHECK(degenerate.value == 0.0);
  for (double g : degenerate.gradient.values()) CHECK(g == 0.0);
}

TEST_CASE("hd_pair_loss agrees with its graph twin") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Mask m = random_mask(7, 7, seed + 20);
    PairConfig cfg;
    cfg.samples_per_part = 12;
    cfg.margin = 2.0;
    cfg.seed = seed;
    const DenseGrid e = random_grid({7, 7, 4}, seed + 30, 1.0);
    check_matches_graph(hd_pair_loss(e, m, cfg), via_graph(e, [&](diff::Graph& g, diff::NodeId x) {
                          return *loss_graph::hd_pair_loss(g, x, m, cfg);
                        }));
  }
}

TEST_CASE("center_loss: hand-computed centers") {
  // fg (1,1),(3,1) -> mu+ = (2,1); bg (0,0),(0,2) -> mu- = (0,1); distance 2.
  const Mask m(2, 2, {1, 1, 0, 0});
  DenseGrid e(2, 2, 2);
  const double vals[] = {1, 1, 3, 1, 0, 0, 0, 2};
  for (std::size_t i = 0; i < 8; ++i) e[i] = vals[i];

  const LossResult active = center_loss(e, m, {3.0});
  CHECK(std::abs(active.value - 1.0) < 1e-12);

  const LossResult boundary = center_loss(e, m, {2.0});
  CHECK(boundary.value == 0.0);
  for (double g : boundary.gradient.values()) CHECK(g == 0.0);

  DenseGrid shifted = e;
  for (std::size_t p = 0; p < 4; ++p) {
    shifted[2 * p] += 7.0;
    shifted[2 * p + 1] -= 3.0;
  }
  const LossResult moved = center_loss(shifted, m, {3.0});
  CHECK(std::memcmp(&moved.value, &active.value, sizeof(double)) == 0);

  const LossResult empty = center_loss(e, Mask(2, 2, false), {3.0});
  CHECK_FALSE(empty.valid);
  CHECK(empty.value == 0.0);
}

TEST_CASE("center_loss agrees with its graph twin") {
  const Mask m = random_mask(6, 5, 40);
  const DenseGrid e = random_grid({6, 5, 3}, 41, 0.5);
  check_matches_graph(center_loss(e, m, {1.0}), via_graph(e, [&](diff::Graph& g, diff::NodeId x) {
                        return *loss_graph::center_loss(g, x, m, {1.0});
                      }));
}

TEST_CASE("mixed loss: linearity and zero coefficients") {
  LossResult cl{1.0, DenseGrid(1, 1, 2, 1.0), true};
  LossResult tl{2.0, DenseGrid(1, 1, 2, -0.5), true};
  const LossResult mixed = mix_losses(cl, tl, {1.0, 1.0});
  CHECK(mixed.value == 3.0);
  CHECK(mixed.gradient.bit_equal(DenseGrid(1, 1, 2, 0.5)));

  const Mask m = random_mask(6, 6, 42);
  PairConfig pair;
  pair.samples_per_part = 16;
  pair.seed = 3;
  const DenseGrid e = random_grid({6, 6, 3}, 43, 0.5);
  const LossResult tl_only = mixed_loss(e, m, pair, {1.0}, {0.0, 1.5});
  const LossResult ref = hd_pair_loss(e, m, pair);
  CHECK(tl_only.value == 1.5 * ref.value);

  // Constant field: centers coincide (L_cl = margin) and L_tl = 0.5.
  const double lambda_cl = 1.7;
  const LossResult composed = mixed_loss(DenseGrid(6, 6, 3, 0.1), m, pair, {lambda_cl}, {2.0, 0.5});
  CHECK(std::abs(composed.value - (2.0 * lambda_cl + 0.25)) < 1e-12);

  CHECK_FALSE(mixed_loss(e, Mask(6, 6, true), pair, {1.0}, {1.0, 1.0}).valid);
  CHECK_THROWS(mix_losses(cl, tl, {-1.0, 1.0}));
}

TEST_CASE("mixed_loss agrees with its graph twin") {
  const Mask m = random_mask(6, 6, 44);
  PairConfig pair;
  pair.samples_per_part = 10;
  pair.seed = 9;
  const DenseGrid e = random_grid({6, 6, 3}, 45, 0.5);
  check_matches_graph(mixed_loss(e, m, pair, {1.0}, {0.7, 1.3}),
                      via_graph(e, [&](diff::Graph& g, diff::NodeId x) {
                        return *loss_graph::mixed_loss(g, x, m, pair, {1.0}, {0.7, 1.3});
                      }));
}

TEST_CASE("config validation") {
  PairConfig p;
  p.samples_per_part = 0;
  CHECK_THROWS(validate(p));
  CHECK_THROWS(validate(CenterConfig{-1.0}));
  CHECK_THROWS(validate(MixedConfig{1.0, -0.5}));
}
