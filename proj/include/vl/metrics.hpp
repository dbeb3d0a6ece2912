#pragma once

#include <string>
#include <vector>

#include "vl/mask.hpp"

namespace vl {

struct SequenceScore {
  std::string sequence_name;
  std::vector<double> per_frame_iou;
  double j_mean = 0.0;
};

/// Foreground intersection over union. When both foregrounds are empty the
/// frame scores `both_empty`.
double iou(const Mask& pred, const Mask& truth, double both_empty = 1.0);

/// Mean IoU over the evaluated frames; frame 0 is skipped by default because
/// its annotation is the fine-tuning input.
SequenceScore j_mean_sequence(const std::vector<Mask>& preds,
                              const std::vector<Mask>& truths, bool skip_first = true,
                              std::string name = {}, double both_empty = 1.0);

struct ComparisonReport {
  std::string label_a;
  std::string label_b;
  std::vector<std::string> sequences;
  std::vector<double> j_a;
  std::vector<double> j_b;
  double mean_a = 0.0;
  double mean_b = 0.0;
  std::size_t wins_a = 0;  // sequences where a is strictly better
  std::size_t wins_b = 0;

  /// Aligned table, percentages with one decimal.
  std::string text() const;
  /// Header "sequence,method_a,method_b", then one row of J fractions per
  /// sequence.
  std::string csv() const;
};

/// Pairs sequences by name; both lists must cover the same set.
ComparisonReport comparison_report(const std::vector<SequenceScore>& scores_a,
                                   const std::vector<SequenceScore>& scores_b,
                                   std::string label_a = "method_a",
                                   std::string label_b = "method_b");

/// Percentage with one decimal, e.g. 0.762 -> "76.2".
std::string format_percent(double fraction);

}  // namespace vl
