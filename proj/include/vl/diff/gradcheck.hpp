#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vl/diff/graph.hpp"

namespace vl::diff {

/// |a - b| / max(1e-8, |a| + |b|)
double relative_error(double a, double b);

struct LeafCheck {
  std::string name;
  double max_relative_error = 0.0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  /// Entries whose +/- step crossed a non-smooth branch (rectifier, hinge,
  /// clamp); central differences are meaningless there.
  std::size_t skipped = 0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<LeafCheck> leaves;
  double tolerance = 0.0;

  double max_relative_error() const;
  std::size_t checked() const;
  std::size_t skipped() const;
  bool passed() const;
};

/// Central differences (f(t+h) - f(t-h)) / 2h for every entry of every leaf
/// (or of the named leaves only), compared against backprop.
GradCheckReport finite_diff_check(const Graph& graph, const Bindings& bindings,
                                  NodeId scalar_output, double step,
                                  double tolerance,
                                  const std::vector<std::string>& only_leaves = {});

using ScalarFunction = std::function<double(const DenseGrid&)>;
/// Returns a value that changes whenever a non-smooth branch flips.
using BranchProbe = std::function<std::uint64_t(const DenseGrid&)>;

/// Same harness for a plain function of one grid with a claimed gradient.
LeafCheck finite_diff_check(const ScalarFunction& f, const DenseGrid& at,
                            const DenseGrid& claimed_gradient, double step,
                            double tolerance, std::string name,
                            const BranchProbe& probe = {});

}  // namespace vl::diff
