#include "vl/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include "vl/diff/gradcheck.hpp"
#include "vl/losses.hpp"
#include "vl/model.hpp"
#include "vl/random.hpp"

namespace vl {

namespace {

// Both parts are guaranteed non-empty.
Mask random_mask(std::size_t h, std::size_t w, Rng& rng) {
  std::vector<std::uint8_t> labels(h * w);
  for (auto& l : labels) l = uniform_real(rng, 0.0, 1.0) < 0.4;
  labels[0] = 1;
  labels[1] = 0;
  return Mask(h, w, std::move(labels));
}

DenseGrid random_grid(Shape shape, double scale, Rng& rng) {
  DenseGrid g(shape);
  for (double& v : g.values()) v = uniform_real(rng, -scale, scale);
  return g;
}

using LossFn = std::function<LossResult(const DenseGrid&)>;
using GraphFn = std::function<diff::NodeId(diff::Graph&, diff::NodeId)>;

struct LossCase {
  const char* name;
  Shape shape;
  double scale;
  LossFn analytic;
  GraphFn build;
};

void check_loss(const LossCase& lc, const DenseGrid& x, std::uint64_t seed,
                const SuiteOptions& opt, SuiteReport& report) {
  diff::Graph g;
  const diff::NodeId in = g.input("x", x.shape());
  const diff::NodeId out = lc.build(g, in);

  const diff::GradCheckReport graph_report =
      diff::finite_diff_check(g, diff::Bindings{{"x", x}}, out, opt.step, opt.tolerance);
  report.entries.push_back({lc.name, "graph", seed, graph_report.max_relative_error(),
                            graph_report.checked(), graph_report.skipped(),
                            graph_report.passed()});

  // Kinks are detected through the graph twin, which takes the same branches.
  diff::Tape probe_tape(g);
  const diff::BranchProbe probe = [&](const DenseGrid& at) {
    probe_tape.forward(diff::Bindings{{"x", at}});
    return probe_tape.branch_signature();
  };
  const LossResult claimed = lc.analytic(x);
  const diff::LeafCheck leaf = diff::finite_diff_check(
      [&](const DenseGrid& at) { return lc.analytic(at).value; }, x, claimed.gradient,
      opt.step, opt.tolerance, lc.name, probe);
  report.entries.push_back({lc.name, "analytic", seed, leaf.max_relative_error, leaf.checked,
                            leaf.skipped, leaf.passed});
}

// The network's backward pass as the trainer drives it: every head is seeded
// with its loss gradient taken at the base point, so the checked objective is
// sum_h <G_h, head_h(theta)> over all leaves. Each parameter enters the
// network multilinearly, which keeps central differences exact away from
// rectifier kinks. The losses' own curvature is covered by the checks above.
void check_composite(std::uint64_t seed, const SuiteOptions& opt, SuiteReport& report) {
  Rng rng(derive_seed({seed, 0xc0de}));
  ModelConfig cfg;
  cfg.trunk_channels = {4, 6};
  cfg.num_videos = 3;
  cfg.embedding_dim = 4;
  cfg.seed = derive_seed({seed, 1});
  const Model model(cfg);
  const std::size_t size = 6;
  const Mask mask = random_mask(size, size, rng);
  const std::size_t v_id = uniform_index(rng, cfg.num_videos);
  PairConfig pair;
  pair.samples_per_part = 8;
  pair.seed = derive_seed({seed, 2});

  const ModelGraph mg = build_model_graph(cfg, size, size);
  diff::Bindings bindings = model.parameters();
  bindings.emplace("image", random_grid({size, size, cfg.input_channels}, 1.0, rng));
  diff::Tape tape(mg.graph);
  tape.forward(bindings);

  // Per-pixel normalisation keeps the objective O(1), so rounding noise in
  // the differences stays below the relative-error floor.
  const double norm = 1.0 / static_cast<double>(size * size);
  DenseGrid seeds[3] = {weighted_bce(tape.value(mg.pred_logits), mask).gradient,
                        video_loss_2d(tape.value(mg.video_logits), mask, v_id).gradient,
                        mixed_loss(tape.value(mg.embedding), mask, pair, {}, {}).gradient};
  const diff::NodeId heads[3] = {mg.pred_logits, mg.video_logits, mg.embedding};
  for (DenseGrid& s : seeds) {
    for (double& v : s.values()) v *= norm;
  }
  const diff::Seed vjp[3] = {{heads[0], &seeds[0]}, {heads[1], &seeds[1]}, {heads[2], &seeds[2]}};
  const diff::GradientSet analytic = tape.backward(vjp);

  const auto objective = [&] {
    double total = 0.0;
    for (int h = 0; h < 3; ++h) {
      const DenseGrid& out = tape.value(heads[h]);
      for (std::size_t k = 0; k < out.size(); ++k) total += seeds[h][k] * out[k];
    }
    return total;
  };

  SuiteEntry entry{"model_composite", "graph", seed, 0.0, 0, 0, true};
  for (diff::NodeId leaf : mg.graph.leaves()) {
    const std::string& name = mg.graph.node(leaf).name;
    DenseGrid& slot = bindings.at(name);
    const DenseGrid base = slot;
    const auto f = [&](const DenseGrid& x) {
      slot = x;
      tape.forward(bindings);
      return objective();
    };
    const diff::BranchProbe probe = [&](const DenseGrid& x) {
      slot = x;
      tape.forward(bindings);
      return tape.branch_signature();
    };
    const diff::LeafCheck c = diff::finite_diff_check(f, base, analytic.at(name), opt.step,
                                                      opt.tolerance, name, probe);
    slot = base;
    entry.max_relative_error = std::max(entry.max_relative_error, c.max_relative_error);
    entry.checked += c.checked;
    entry.skipped += c.skipped;
    entry.passed = entry.passed && c.passed;
  }
  report.entries.push_back(entry);
}

}  // namespace

bool SuiteReport::passed() const {
  return !entries.empty() &&
         std::all_of(entries.begin(), entries.end(), [](const SuiteEntry& e) { return e.passed; });
}

std::vector<std::string> SuiteReport::checks() const {
  std::vector<std::string> names;
  for (const SuiteEntry& e : entries) {
    if (std::find(names.begin(), names.end(), e.check) == names.end()) names.push_back(e.check);
  }
  return names;
}

double SuiteReport::max_relative_error(const std::string& check) const {
  double worst = 0.0;
  for (const SuiteEntry& e : entries) {
    if (e.check == check) worst = std::max(worst, e.max_relative_error);
  }
  return worst;
}

std::size_t SuiteReport::seeds(const std::string& check) const {
  std::vector<std::uint64_t> seen;
  for (const SuiteEntry& e : entries) {
    if (e.check == check && std::find(seen.begin(), seen.end(), e.seed) == seen.end()) {
      seen.push_back(e.seed);
    }
  }
  return seen.size();
}

std::string SuiteReport::text() const {
  std::string out;
  char line[160];
  for (const std::string& name : checks()) {
    std::size_t checked = 0, skipped = 0;
    bool ok = true;
    for (const SuiteEntry& e : entries) {
      if (e.check != name) continue;
      checked += e.checked;
      skipped += e.skipped;
      ok = ok && e.passed;
    }
    std::snprintf(line, sizeof line, "%-16s max_rel_err=%.3e seeds=%zu checked=%zu skipped=%zu %s\n",
                  name.c_str(), max_relative_error(name), seeds(name), checked, skipped,
                  ok ? "ok" : "FAIL");
    out += line;
  }
  std::snprintf(line, sizeof line, "step=%g tolerance=%g time=%.2fs\n", step, tolerance, seconds);
  out += line;
  return out;
}

SuiteReport run_gradcheck_suite(const SuiteOptions& opt) {
  if (opt.num_seeds == 0) throw std::invalid_argument("gradcheck: need at least one seed");
  const auto start = std::chrono::steady_clock::now();
  SuiteReport report;
  report.step = opt.step;
  report.tolerance = opt.tolerance;

  for (std::size_t s = 0; s < opt.num_seeds; ++s) {
    const std::uint64_t seed = opt.first_seed + s;
    Rng rng(derive_seed({seed, 0x9c}));
    const Mask small = random_mask(4, 4, rng);
    const Mask mask = random_mask(8, 8, rng);
    const std::size_t v_id = uniform_index(rng, 3);
    // The pair and center losses are scale-equivariant: L(k e; k margin) =
    // k L(e; margin). Checking at a wide spread keeps the norm's curvature,
    // and with it the central-difference truncation error, small.
    PairConfig pair;
    pair.samples_per_part = 16;
    pair.margin = 12.0;
    pair.seed = derive_seed({seed, 3});
    const CenterConfig center{12.0};
    const MixedConfig mix{0.7, 1.3};

    const LossCase cases[] = {
        {"weighted_bce", {4, 4, 1}, 2.0,
         [&](const DenseGrid& x) { return weighted_bce(x, small); },
         [&](diff::Graph& g, diff::NodeId x) { return loss_graph::weighted_bce(g, x, small); }},
        {"video_loss_2d", {8, 8, 3}, 2.0,
         [&](const DenseGrid& x) { return video_loss_2d(x, mask, v_id); },
         [&](diff::Graph& g, diff::NodeId x) {
           return loss_graph::video_loss_2d(g, x, mask, v_id);
         }},
        {"hd_pair_loss", {8, 8, 4}, 8.0,
         [&](const DenseGrid& x) { return hd_pair_loss(x, mask, pair); },
         [&](diff::Graph& g, diff::NodeId x) { return *loss_graph::hd_pair_loss(g, x, mask, pair); }},
        {"center_loss", {8, 8, 4}, 8.0,
         [&](const DenseGrid& x) { return center_loss(x, mask, center); },
         [&](diff::Graph& g, diff::NodeId x) { return *loss_graph::center_loss(g, x, mask, center); }},
        {"mixed_loss", {8, 8, 4}, 8.0,
         [&](const DenseGrid& x) { return mixed_loss(x, mask, pair, center, mix); },
         [&](diff::Graph& g, diff::NodeId x) {
           return *loss_graph::mixed_loss(g, x, mask, pair, center, mix);
         }},
    };
    for (const LossCase& lc : cases) {
      check_loss(lc, random_grid(lc.shape, lc.scale, rng), seed, opt, report);
    }
    check_composite(seed, opt, report);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace vl
