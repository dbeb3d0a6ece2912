#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace vl {

/// One loss checked at one seed through one route: "analytic" compares the
/// hand-derived gradient of the loss function, "graph" compares backprop
/// through the loss rebuilt from engine ops.
struct SuiteEntry {
  std::string check;
  std::string route;
  std::uint64_t seed = 0;
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool passed = true;
};

struct SuiteReport {
  std::vector<SuiteEntry> entries;
  double step = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;

  bool passed() const;
  /// Names in the order checked: weighted_bce, video_loss_2d, hd_pair_loss,
  /// center_loss, mixed_loss, model_composite.
  std::vector<std::string> checks() const;
  double max_relative_error(const std::string& check) const;
  std::size_t seeds(const std::string& check) const;
  /// One line per check with its worst error across seeds and routes.
  std::string text() const;
};

struct SuiteOptions {
  std::uint64_t first_seed = 0;
  std::size_t num_seeds = 10;
  double step = 1e-3;
  double tolerance = 1e-4;
};

/// Central-difference check of every loss and of the whole network with all
/// losses attached. Seeds run first_seed, first_seed + 1, ...
SuiteReport run_gradcheck_suite(const SuiteOptions& options);

}  // namespace vl
