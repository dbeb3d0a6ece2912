#include "vl/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "vl/netpbm.hpp"

namespace vl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

std::uint64_t to_u64(const std::string& s) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw std::invalid_argument("not a non-negative integer: '" + s + "'");
  }
  try {
    return std::stoull(s);
  } catch (const std::exception&) {
    throw std::invalid_argument("integer out of range: '" + s + "'");
  }
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw std::invalid_argument("not a boolean: '" + s + "'");
}

std::vector<std::size_t> to_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(to_u64(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::string from_list(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

struct Entry {
  ConfigKey key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define VL_SIZE(k, field, doc)                                              \
  Entry{{k, doc},                                                           \
        [](const RunConfig& c) { return std::to_string(c.field); },         \
        [](RunConfig& c, const std::string& v) {                            \
          c.field = static_cast<decltype(c.field)>(to_u64(v));              \
        }}
#define VL_REAL(k, field, doc)                                              \
  Entry{{k, doc}, [](const RunConfig& c) { return fmt_double(c.field); },   \
        [](RunConfig& c, const std::string& v) { c.field = to_double(v); }}

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table{
      VL_SIZE("model.input_channels", model.input_channels, "image channels (3)"),
      Entry{{"model.trunk_channels", "comma-separated 3x3 trunk widths (8,16,16)"},
            [](const RunConfig& c) { return from_list(c.model.trunk_channels); },
            [](RunConfig& c, const std::string& v) { c.model.trunk_channels = to_list(v); }},
      VL_SIZE("model.num_videos", model.num_videos, "video-identity head width V (8)"),
      VL_SIZE("model.embedding_dim", model.embedding_dim, "embedding dimension D (20)"),
      VL_SIZE("model.seed", model.seed, "parameter initialisation seed (0)"),
      VL_SIZE("synth.num_train_videos", synth.num_train_videos, "training videos (8)"),
      VL_SIZE("synth.num_test_videos", synth.num_test_videos, "test videos (4)"),
      VL_SIZE("synth.frames_per_video", synth.frames_per_video, "frames per video (16)"),
      VL_SIZE("synth.image_size", synth.image_size, "square frame size in pixels (48)"),
      VL_SIZE("synth.distractor_count", synth.distractor_count, "look-alike objects per video (2)"),
      VL_SIZE("synth.seed", synth.seed, "dataset seed (0)"),
      Entry{{"train.loss_mode", "none | v2d | vhd | vmixed (none)"},
            [](const RunConfig& c) { return std::string(to_string(c.train.loss_mode)); },
            [](RunConfig& c, const std::string& v) { c.train.loss_mode = parse_loss_mode(v); }},
      VL_REAL("train.learning_rate", train.learning_rate, "SGD learning rate (3e-06)"),
      VL_REAL("train.momentum", train.momentum, "SGD momentum (0.9)"),
      VL_REAL("train.weight_decay", train.weight_decay, "L2 weight decay (0.0005)"),
      VL_SIZE("train.parent_epochs", train.parent_epochs, "parent training epochs (50)"),
      VL_SIZE("train.finetune_iters", train.finetune_iters, "online fine-tuning iterations (200)"),
      VL_REAL("train.vl_weight", train.vl_weight, "video-loss weight alpha (1)"),
      VL_SIZE("train.batch_size", train.batch_size, "frames per SGD step (1)"),
      VL_SIZE("train.seed", train.seed, "shuffle and sampling seed (0)"),
      VL_SIZE("loss.samples_per_part", train.pair.samples_per_part, "sampled points per part (256)"),
      VL_REAL("loss.pair_margin", train.pair.margin, "pairwise hinge margin (1)"),
      VL_REAL("loss.center_margin", train.center.margin, "center loss margin (1)"),
      VL_REAL("loss.beta1", train.mix.center_weight, "mixed loss center weight (1)"),
      VL_REAL("loss.beta2", train.mix.pair_weight, "mixed loss pair weight (1)"),
      Entry{{"eval.skip_first", "exclude the annotated first frame from J (true)"},
            [](const RunConfig& c) { return std::string(c.eval.skip_first ? "true" : "false"); },
            [](RunConfig& c, const std::string& v) { c.eval.skip_first = to_bool(v); }},
      VL_REAL("eval.both_empty_iou", eval.both_empty_iou, "IoU when both masks are empty (1)"),
  };
  return table;
}

#undef VL_SIZE
#undef VL_REAL

const Entry& find_entry(const std::string& key) {
  for (const Entry& e : entries()) {
    if (e.key.key == key) return e;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    for (const Entry& e : entries()) k.push_back(e.key);
    return k;
  }();
  return keys;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Entry& e = find_entry(key);
  try {
    e.set(cfg, value);
  } catch (const std::invalid_argument& ex) {
    throw std::invalid_argument(key + ": " + ex.what());
  }
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  return find_entry(key).get(cfg);
}

RunConfig parse_run_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected 'key = value'");
    }
    try {
      set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_run_config(buf.str(), std::move(base));
  } catch (const std::invalid_argument& e) {
    throw IoError(path, e.what());
  }
}

std::string render_run_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : entries()) {
    out += "# " + e.key.doc + "\n" + e.key.key + " = " + e.get(cfg) + "\n";
  }
  return out;
}

}  // namespace vl
