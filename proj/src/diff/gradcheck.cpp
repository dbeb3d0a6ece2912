#include "vl/diff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vl::diff {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b));
}

double GradCheckReport::max_relative_error() const {
  double worst = 0.0;
  for (const auto& l : leaves) worst = std::max(worst, l.max_relative_error);
  return worst;
}

std::size_t GradCheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& l : leaves) n += l.checked;
  return n;
}

std::size_t GradCheckReport::skipped() const {
  std::size_t n = 0;
  for (const auto& l : leaves) n += l.skipped;
  return n;
}

bool GradCheckReport::passed() const {
  return std::all_of(leaves.begin(), leaves.end(),
                     [](const LeafCheck& l) { return l.passed; });
}

namespace {

void record(LeafCheck& check, std::size_t index, double analytic, double numeric,
            double tolerance) {
  const double err = relative_error(analytic, numeric);
  ++check.checked;
  if (err > check.max_relative_error) {
    check.max_relative_error = err;
    check.worst_index = index;
  }
  if (err > tolerance) check.passed = false;
}

}  // namespace

GradCheckReport finite_diff_check(const Graph& graph, const Bindings& bindings,
                                  NodeId scalar_output, double step,
                                  double tolerance,
                                  const std::vector<std::string>& only_leaves) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be > 0");

  Tape tape(graph);
  tape.forward(bindings);
  const GradientSet analytic = tape.backward(scalar_output);
  const std::uint64_t base_signature = tape.branch_signature();

  GradCheckReport report;
  report.tolerance = tolerance;
  Bindings probe = bindings;

  for (NodeId leaf : graph.leaves()) {
    const std::string& name = graph.node(leaf).name;
    if (!only_leaves.empty() &&
        std::find(only_leaves.begin(), only_leaves.end(), name) == only_leaves.end()) {
      continue;
    }
    LeafCheck check;
    check.name = name;
    DenseGrid& values = probe.at(name);
    const DenseGrid& grad = analytic.at(name);
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double saved = values[k];
      values[k] = saved + step;
      tape.forward(probe);
      const double plus = tape.value(scalar_output).item();
      const bool plus_same = tape.branch_signature() == base_signature;
      values[k] = saved - step;
      tape.forward(probe);
      const double minus = tape.value(scalar_output).item();
      const bool minus_same = tape.branch_signature() == base_signature;
      values[k] = saved;
      if (!plus_same || !minus_same) {
        ++check.skipped;
        continue;
      }
      record(check, k, grad[k], (plus - minus) / (2.0 * step), tolerance);
    }
    report.leaves.push_back(std::move(check));
  }
  return report;
}

LeafCheck finite_diff_check(const ScalarFunction& f, const DenseGrid& at,
                            const DenseGrid& claimed_gradient, double step,
                            double tolerance, std::string name,
                            const BranchProbe& probe) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_check: step must be > 0");
  if (claimed_gradient.shape() != at.shape()) {
    throw std::invalid_argument("finite_diff_check: gradient shape " +
                                claimed_gradient.shape().str() + " vs point " +
                                at.shape().str());
  }
  LeafCheck check;
  check.name = std::move(name);
  const std::uint64_t base = probe ? probe(at) : 0;
  DenseGrid x = at;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = x[k];
    x[k] = saved + step;
    const double plus = f(x);
    const bool plus_same = !probe || probe(x) == base;
    x[k] = saved - step;
    const double minus = f(x);
    const bool minus_same = !probe || probe(x) == base;
    x[k] = saved;
    if (!plus_same || !minus_same) {
      ++check.skipped;
      continue;
    }
    record(check, k, claimed_gradient[k], (plus - minus) / (2.0 * step), tolerance);
  }
  return check;
}

}  // namespace vl::diff
