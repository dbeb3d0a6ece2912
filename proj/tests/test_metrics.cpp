#include <doctest.h>

#include <cmath>
#include <string>

#include "vl/metrics.hpp"

using namespace vl;

namespace {

Mask row_mask(std::initializer_list<std::uint8_t> labels) {
  return Mask(1, labels.size(), std::vector<std::uint8_t>(labels));
}

SequenceScore score(std::string name, double j) { return {std::move(name), {j}, j}; }

}  // namespace

TEST_CASE("iou: identity, disjoint and one of three") {
  const Mask a = row_mask({1, 1, 0, 0});
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, row_mask({0, 0, 1, 1})) == 0.0);
  CHECK(iou(a, row_mask({0, 1, 1, 0})) == 1.0 / 3.0);
  CHECK(iou(row_mask({0, 0}), row_mask({0, 0})) == 1.0);
  CHECK(iou(row_mask({0, 0}), row_mask({0, 0}), 0.0) == 0.0);
  CHECK_THROWS(iou(a, row_mask({1, 0})));
}

TEST_CASE("iou: symmetric and monotone") {
  const Mask pred = row_mask({1, 1, 0, 0, 1, 0});
  const Mask truth = row_mask({0, 1, 1, 0, 1, 1});
  CHECK(iou(pred, truth) == iou(truth, pred));

  Mask more_right = pred;
  more_right.set(0, 2, true);  // a correct pixel
  CHECK(iou(more_right, truth) >= iou(pred, truth));
  Mask more_wrong = pred;
  more_wrong.set(0, 3, true);  // a wrong pixel
  CHECK(iou(more_wrong, truth) <= iou(pred, truth));
}

TEST_CASE("j_mean_sequence") {
  const Mask a = row_mask({1, 1, 0, 0});
  const Mask b = row_mask({0, 0, 1, 1});
  const Mask third = row_mask({0, 1, 1, 0});

  CHECK(j_mean_sequence({a, a, a}, {a, a, a}).j_mean == 1.0);

  const SequenceScore half = j_mean_sequence({a, a}, {a, b}, false, "s");
  CHECK(half.j_mean == 0.5);
  CHECK(half.sequence_name == "s");
  CHECK(half.per_frame_iou.size() == 2);

  // Frame 0 is skipped; frames 1 and 2 score 1/3 and 1.
  const SequenceScore two_thirds = j_mean_sequence({b, a, a}, {a, third, a});
  REQUIRE(two_thirds.per_frame_iou.size() == 2);
  CHECK(std::abs(two_thirds.j_mean - 2.0 / 3.0) < 1e-12);
  CHECK(std::abs(two_thirds.j_mean -
                 (two_thirds.per_frame_iou[0] + two_thirds.per_frame_iou[1]) / 2.0) < 1e-12);

  CHECK_THROWS(j_mean_sequence({a}, {a}));  // nothing left after skipping frame 0
  CHECK_THROWS(j_mean_sequence({a, a}, {a}));
}

TEST_CASE("comparison_report: the published pair renders verbatim") {
  const ComparisonReport r =
      comparison_report({score("seq", 0.750)}, {score("seq", 0.762)}, "OSVOS", "OSVOS-V2d");
  CHECK(r.wins_a == 0);
  CHECK(r.wins_b == 1);
  const std::string text = r.text();
  CHECK(text.find("75.0") != std::string::npos);
  CHECK(text.find("76.2") != std::string::npos);
  CHECK(text.find("OSVOS-V2d") != std::string::npos);
  CHECK(format_percent(0.762) == "76.2");
  CHECK(format_percent(0.75) == "75.0");

  const std::string csv = r.csv();
  CHECK(csv.rfind("sequence,method_a,method_b\n", 0) == 0);
  CHECK(csv.find("seq,") != std::string::npos);
}

TEST_CASE("comparison_report: self-comparison and win counting") {
  std::vector<SequenceScore> a, b;
  for (int i = 0; i < 20; ++i) {
    const std::string name = "s" + std::to_string(i);
    a.push_back(score(name, i < 8 ? 0.8 : 0.4));
    b.push_back(score(name, 0.6));
  }
  const ComparisonReport self = comparison_report(a, a);
  CHECK(self.wins_a == 0);
  CHECK(self.wins_b == 0);
  CHECK(self.mean_a == self.mean_b);

  const ComparisonReport r = comparison_report(a, b);
  CHECK(r.wins_a == 8);
  CHECK(r.wins_b == 12);

  // Pairing is by name, not position.
  std::vector<SequenceScore> shuffled(b.rbegin(), b.rend());
  CHECK(comparison_report(a, shuffled).wins_b == 12);
}

TEST_CASE("comparison_report: mismatched sequence sets are rejected") {
  CHECK_THROWS(comparison_report({score("x", 0.5)}, {score("y", 0.5)}));
  CHECK_THROWS(comparison_report({score("x", 0.5)}, {score("x", 0.5), score("y", 0.5)}));
}
