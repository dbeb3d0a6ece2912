#include "vl/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

namespace vl {

double iou(const Mask& pred, const Mask& truth, double both_empty) {
  if (pred.height() != truth.height() || pred.width() != truth.width()) {
    throw std::invalid_argument(
        "iou: prediction " + std::to_string(pred.height()) + "x" +
        std::to_string(pred.width()) + " vs truth " + std::to_string(truth.height()) +
        "x" + std::to_string(truth.width()));
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += (pred[i] && truth[i]) ? 1 : 0;
    uni += (pred[i] || truth[i]) ? 1 : 0;
  }
  if (uni == 0) return both_empty;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

SequenceScore j_mean_sequence(const std::vector<Mask>& preds,
                              const std::vector<Mask>& truths, bool skip_first,
                              std::string name, double both_empty) {
  if (preds.size() != truths.size()) {
    throw std::invalid_argument("j_mean_sequence: " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(truths.size()) +
                                " frames");
  }
  SequenceScore score;
  score.sequence_name = std::move(name);
  for (std::size_t f = skip_first ? 1 : 0; f < preds.size(); ++f) {
    score.per_frame_iou.push_back(iou(preds[f], truths[f], both_empty));
  }
  if (score.per_frame_iou.empty()) {
    throw std::invalid_argument("j_mean_sequence: no frames to evaluate");
  }
  double sum = 0.0;
  for (double v : score.per_frame_iou) sum += v;
  score.j_mean = sum / static_cast<double>(score.per_frame_iou.size());
  return score;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

ComparisonReport comparison_report(const std::vector<SequenceScore>& scores_a,
                                   const std::vector<SequenceScore>& scores_b,
                                   std::string label_a, std::string label_b) {
  std::map<std::string, double> b_by_name;
  for (const auto& s : scores_b) {
    if (!b_by_name.emplace(s.sequence_name, s.j_mean).second) {
      throw std::invalid_argument("comparison_report: duplicate sequence '" +
                                  s.sequence_name + "'");
    }
  }
  if (scores_a.size() != scores_b.size()) {
    throw std::invalid_argument("comparison_report: " + std::to_string(scores_a.size()) +
                                " vs " + std::to_string(scores_b.size()) + " sequences");
  }
  if (scores_a.empty()) throw std::invalid_argument("comparison_report: no sequences");

  ComparisonReport r;
  r.label_a = std::move(label_a);
  r.label_b = std::move(label_b);
  for (const auto& s : scores_a) {
    auto it = b_by_name.find(s.sequence_name);
    if (it == b_by_name.end()) {
      throw std::invalid_argument("comparison_report: sequence '" + s.sequence_name +
                                  "' missing from the second score set");
    }
    r.sequences.push_back(s.sequence_name);
    r.j_a.push_back(s.j_mean);
    r.j_b.push_back(it->second);
    r.mean_a += s.j_mean;
    r.mean_b += it->second;
    if (s.j_mean > it->second) ++r.wins_a;
    if (it->second > s.j_mean) ++r.wins_b;
  }
  r.mean_a /= static_cast<double>(r.sequences.size());
  r.mean_b /= static_cast<double>(r.sequences.size());
  return r;
}

std::string ComparisonReport::text() const {
  std::size_t name_w = std::string("sequence").size();
  for (const auto& s : sequences) name_w = std::max(name_w, s.size());
  const std::size_t a_w = std::max<std::size_t>(label_a.size(), 5);
  const std::size_t b_w = std::max<std::size_t>(label_b.size(), 5);

  std::ostringstream out;
  auto row = [&](const std::string& name, const std::string& a, const std::string& b) {
    out << name << std::string(name_w - name.size() + 2, ' ')
        << std::string(a_w - a.size(), ' ') << a << "  "
        << std::string(b_w - b.size(), ' ') << b << '\n';
  };
  row("sequence", label_a, label_b);
  out << std::string(name_w + a_w + b_w + 4, '-') << '\n';
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    row(sequences[i], format_percent(j_a[i]), format_percent(j_b[i]));
  }
  out << std::string(name_w + a_w + b_w + 4, '-') << '\n';
  row("mean", format_percent(mean_a), format_percent(mean_b));
  row("wins", std::to_string(wins_a), std::to_string(wins_b));
  return out.str();
}

std::string ComparisonReport::csv() const {
  std::ostringstream out;
  out << "sequence,method_a,method_b\n";
  for (std::size_t i = 0; i < sequences.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f,%.6f", j_a[i], j_b[i]);
    out << sequences[i] << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace vl
