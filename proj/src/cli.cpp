#include "vl/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "vl/checkpoint.hpp"
#include "vl/dataset.hpp"
#include "vl/gradcheck_suite.hpp"
#include "vl/metrics.hpp"
#include "vl/netpbm.hpp"
#include "vl/run_config.hpp"
#include "vl/trainer.hpp"

namespace fs = std::filesystem;

namespace vl {

namespace {

// Flags shared by every subcommand that reads a configuration.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value configuration file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "override one key, e.g. --set train.learning_rate=0.005");
  }

  // Defaults, then the file, then --set; subcommand flags are applied last
  // by the caller.
  RunConfig load() const {
    RunConfig cfg = file.empty() ? RunConfig{} : load_run_config(file);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
      try {
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
      } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("--set", e.what());
      }
    }
    return cfg;
  }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << text;
  if (!out) throw IoError(path, "write failed");
}

const VideoSequence& find_video(const Dataset& data, const std::string& name,
                                const fs::path& root) {
  for (const auto* split : {&data.test, &data.train}) {
    for (const VideoSequence& v : *split) {
      if (v.name == name) return v;
    }
  }
  throw IoError(root, "no video named '" + name + "' in either split");
}

// Eval report: "sequence,j_mean,per_frame_iou" with the per-frame IoUs
// joined by ';'. Values are printed with full precision so reports compare
// exactly.
std::string eval_csv(const std::vector<SequenceScore>& scores) {
  std::string out = "sequence,j_mean,per_frame_iou\n";
  for (const SequenceScore& s : scores) {
    out += s.sequence_name + "," + fmt(s.j_mean) + ",";
    for (std::size_t i = 0; i < s.per_frame_iou.size(); ++i) {
      if (i) out += ";";
      out += fmt(s.per_frame_iou[i]);
    }
    out += "\n";
  }
  return out;
}

std::vector<SequenceScore> read_eval_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open report");
  std::string line;
  if (!std::getline(in, line) || line.rfind("sequence,j_mean", 0) != 0) {
    throw IoError(path, "not an eval report (expected header 'sequence,j_mean,per_frame_iou')");
  }
  std::vector<SequenceScore> scores;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream row(line);
    SequenceScore s;
    std::string j, frames;
    if (!std::getline(row, s.sequence_name, ',') || !std::getline(row, j, ',')) {
      throw IoError(path, "malformed report line " + std::to_string(lineno));
    }
    std::getline(row, frames);
    try {
      s.j_mean = std::stod(j);
      std::istringstream list(frames);
      std::string v;
      while (std::getline(list, v, ';')) s.per_frame_iou.push_back(std::stod(v));
    } catch (const std::exception&) {
      throw IoError(path, "bad number on report line " + std::to_string(lineno));
    }
    scores.push_back(std::move(s));
  }
  return scores;
}

std::string score_table(const std::vector<SequenceScore>& scores) {
  std::size_t width = 8;
  for (const auto& s : scores) width = std::max(width, s.sequence_name.size());
  std::string out = "sequence" + std::string(width - 8 + 2, ' ') + "J mean\n";
  double sum = 0.0;
  for (const auto& s : scores) {
    out += s.sequence_name + std::string(width - s.sequence_name.size() + 2, ' ') +
           format_percent(s.j_mean) + "\n";
    sum += s.j_mean;
  }
  if (!scores.empty()) {
    out += "mean" + std::string(width - 4 + 2, ' ') +
           format_percent(sum / static_cast<double>(scores.size())) + "\n";
  }
  return out;
}

// --- subcommands -----------------------------------------------------------

struct GenData {
  ConfigFlags config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;

  int run(std::ostream& out, std::ostream& err) const {
    RunConfig cfg = config.load();
    if (seed) cfg.synth.seed = *seed;
    err << "generating " << cfg.synth.num_train_videos << " train / "
        << cfg.synth.num_test_videos << " test videos (seed " << cfg.synth.seed << ")\n";
    write_dataset(out_dir, generate_synthetic(cfg.synth));
    out << "wrote dataset to " << out_dir << "\n";
    return 0;
  }
};

struct TrainParent {
  ConfigFlags config;
  std::string data, out_path, resume, loss, preset;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;

  int run(std::ostream& out, std::ostream& err) const {
    RunConfig cfg = config.load();
    if (preset == "paper") {
      const TrainConfig p = TrainConfig::paper_preset();
      cfg.train.learning_rate = p.learning_rate;
      cfg.train.parent_epochs = p.parent_epochs;
      cfg.train.finetune_iters = p.finetune_iters;
    }
    if (!loss.empty()) cfg.train.loss_mode = parse_loss_mode(loss);
    if (epochs) cfg.train.parent_epochs = *epochs;
    if (seed) cfg.train.seed = *seed;
    if (alpha) cfg.train.vl_weight = *alpha;

    const std::vector<VideoSequence> videos = read_split(data, "train");
    ParentTrainer trainer = resume.empty()
                                ? ParentTrainer(Model(cfg.model), videos, cfg.train)
                                : ParentTrainer::from_checkpoint(load_checkpoint(resume),
                                                                 videos, cfg.train);
    err << "parent training: loss " << to_string(cfg.train.loss_mode) << ", "
        << videos.size() << " videos, epochs " << trainer.epochs_done() << " -> "
        << cfg.train.parent_epochs << "\n";
    double last = 0.0;
    const auto start = std::chrono::steady_clock::now();
    while (trainer.epochs_done() < cfg.train.parent_epochs) {
      try {
        last = trainer.run_epoch();
      } catch (const TrainingDiverged& e) {
        save_checkpoint(out_path, trainer.checkpoint());
        err << "training diverged: " << e.what() << "; last good state saved to "
            << out_path << "\n";
        return 2;
      }
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      err << "epoch " << trainer.epochs_done() << " loss " << fixed(last, 4) << " ("
          << fixed(secs, 1) << "s)\n";
    }
    save_checkpoint(out_path, trainer.checkpoint());
    out << "epochs " << trainer.epochs_done() << " final_loss " << fmt(last) << " checkpoint "
        << out_path << "\n";
    return 0;
  }
};

struct Finetune {
  ConfigFlags config;
  std::string parent, video, data, out_path;
  std::optional<std::size_t> iters;

  int run(std::ostream& out, std::ostream& err) const {
    RunConfig cfg = config.load();
    if (iters) cfg.train.finetune_iters = *iters;
    const Dataset ds = read_dataset(data);
    const VideoSequence& v = find_video(ds, video, data);
    if (v.frames.empty()) throw IoError(data, "video '" + video + "' has no frames");
    err << "fine-tuning on " << v.name << " frame 0 for " << cfg.train.finetune_iters
        << " iterations\n";
    const Checkpoint tuned =
        finetune_online(load_checkpoint(parent), v.frames[0], v.masks[0], cfg.train);
    if (fs::path(out_path).has_parent_path()) fs::create_directories(fs::path(out_path).parent_path());
    save_checkpoint(out_path, tuned);
    out << "fine-tuned " << v.name << " -> " << out_path << "\n";
    return 0;
  }
};

struct Eval {
  ConfigFlags config;
  std::string model, data, split = "test", report;

  int run(std::ostream& out, std::ostream& err) const {
    const RunConfig cfg = config.load();
    const std::vector<VideoSequence> videos = read_split(data, split);
    const bool per_video = fs::is_directory(model);
    std::optional<Model> shared;
    if (!per_video) shared = load_checkpoint(model).to_model();
    std::vector<SequenceScore> scores;
    for (const VideoSequence& v : videos) {
      const SequenceScore s =
          per_video ? evaluate(load_checkpoint(fs::path(model) / (v.name + ".ckpt")).to_model(),
                               v, cfg.eval)
                    : evaluate(*shared, v, cfg.eval);
      err << v.name << " J " << format_percent(s.j_mean) << "\n";
      scores.push_back(s);
    }
    if (!report.empty()) write_text(report, eval_csv(scores));
    out << score_table(scores);
    return 0;
  }
};

struct Separation {
  std::string model, data, split = "test";

  int run(std::ostream& out, std::ostream&) const {
    const double ratio =
        embedding_separation(load_checkpoint(model).to_model(), read_split(data, split));
    out << "separation " << fmt(ratio) << "\n";
    return 0;
  }
};

struct Compare {
  std::string report_a, report_b, label_a = "method_a", label_b = "method_b", csv;

  int run(std::ostream& out, std::ostream&) const {
    const ComparisonReport r = comparison_report(read_eval_csv(report_a),
                                                 read_eval_csv(report_b), label_a, label_b);
    if (!csv.empty()) write_text(csv, r.csv());
    out << r.text();
    return 0;
  }
};

struct GradCheck {
  std::uint64_t seed = 0;
  std::size_t seeds = 10;

  int run(std::ostream& out, std::ostream& err) const {
    SuiteOptions opt;
    opt.first_seed = seed;
    opt.num_seeds = seeds;
    err << "central differences over seeds " << seed << ".." << seed + seeds - 1 << "\n";
    const SuiteReport r = run_gradcheck_suite(opt);
    out << r.text();
    return r.passed() ? 0 : 2;
  }
};

struct PrintConfig {
  ConfigFlags config;

  int run(std::ostream& out, std::ostream&) const {
    out << render_run_config(config.load());
    return 0;
  }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Video-loss training and evaluation for one-shot video object segmentation",
               "vlseg"};
  app.require_subcommand(1);

  GenData gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "render the synthetic benchmark");
  gen.config.attach(gen_cmd);
  gen_cmd->add_option("--out", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "dataset seed (overrides synth.seed)");

  TrainParent tp;
  auto* tp_cmd = app.add_subcommand("train-parent", "train the parent network");
  tp.config.attach(tp_cmd);
  tp_cmd->add_option("--data", tp.data, "dataset root")->required();
  tp_cmd->add_option("--loss", tp.loss, "video loss")
      ->check(CLI::IsMember({"none", "v2d", "vhd", "vmixed"}));
  tp_cmd->add_option("--out", tp.out_path, "checkpoint to write")->required();
  tp_cmd->add_option("--epochs", tp.epochs, "parent epochs (overrides train.parent_epochs)");
  tp_cmd->add_option("--seed", tp.seed, "training seed (overrides train.seed)");
  tp_cmd->add_option("--alpha", tp.alpha, "video-loss weight (overrides train.vl_weight)");
  tp_cmd->add_option("--resume", tp.resume, "continue from a parent checkpoint")
      ->check(CLI::ExistingFile);
  tp_cmd->add_option("--preset", tp.preset, "'paper': lr 1e-8, 240 epochs, 10000 fine-tune steps")
      ->check(CLI::IsMember({"paper"}));

  Finetune ft;
  auto* ft_cmd = app.add_subcommand("finetune", "adapt a parent to one video's first frame");
  ft.config.attach(ft_cmd);
  ft_cmd->add_option("--parent", ft.parent, "parent checkpoint")->required()->check(CLI::ExistingFile);
  ft_cmd->add_option("--video", ft.video, "video name (test split first, then train)")->required();
  ft_cmd->add_option("--data", ft.data, "dataset root")->required();
  ft_cmd->add_option("--out", ft.out_path, "checkpoint to write")->required();
  ft_cmd->add_option("--iters", ft.iters, "iterations (overrides train.finetune_iters)");

  Eval ev;
  auto* ev_cmd = app.add_subcommand("eval", "score a model on a split");
  ev.config.attach(ev_cmd);
  ev_cmd->add_option("--model", ev.model,
                     "checkpoint, or a directory holding <video>.ckpt per video")
      ->required()
      ->check(CLI::ExistingPath);
  ev_cmd->add_option("--data", ev.data, "dataset root")->required();
  ev_cmd->add_option("--split", ev.split, "train or test")->check(CLI::IsMember({"train", "test"}));
  ev_cmd->add_option("--report", ev.report, "CSV report to write");

  Separation sep;
  auto* sep_cmd = app.add_subcommand("separation", "embedding center distance over spread");
  sep_cmd->add_option("--model", sep.model, "checkpoint")->required()->check(CLI::ExistingFile);
  sep_cmd->add_option("--data", sep.data, "dataset root")->required();
  sep_cmd->add_option("--split", sep.split, "train or test")->check(CLI::IsMember({"train", "test"}));

  Compare cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "compare two eval reports per sequence");
  cmp_cmd->add_option("--report-a", cmp.report_a, "first eval report")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--report-b", cmp.report_b, "second eval report")->required()->check(CLI::ExistingFile);
  cmp_cmd->add_option("--label-a", cmp.label_a, "column label for the first report");
  cmp_cmd->add_option("--label-b", cmp.label_b, "column label for the second report");
  cmp_cmd->add_option("--csv", cmp.csv, "also write the comparison as CSV");

  GradCheck gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference check of every loss and the model");
  gc_cmd->add_option("--seed", gc.seed, "first seed");
  gc_cmd->add_option("--seeds", gc.seeds, "number of seeds")->check(CLI::PositiveNumber);

  PrintConfig pc;
  auto* pc_cmd = app.add_subcommand("print-config", "print every configuration key and value");
  pc.config.attach(pc_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 1;
  }

  try {
    if (gen_cmd->parsed()) return gen.run(out, err);
    if (tp_cmd->parsed()) return tp.run(out, err);
    if (ft_cmd->parsed()) return ft.run(out, err);
    if (ev_cmd->parsed()) return ev.run(out, err);
    if (sep_cmd->parsed()) return sep.run(out, err);
    if (cmp_cmd->parsed()) return cmp.run(out, err);
    if (gc_cmd->parsed()) return gc.run(out, err);
    if (pc_cmd->parsed()) return pc.run(out, err);
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace vl
