#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vl/dataset.hpp"
#include "vl/model.hpp"
#include "vl/trainer.hpp"

namespace vl {

/// Every tunable of the pipeline in one flat record. Text form is one
/// `key = value` per line; '#' starts a comment; unknown keys are rejected.
struct RunConfig {
  ModelConfig model;
  SynthConfig synth;
  TrainConfig train;
  EvalOptions eval;

  friend bool operator==(const RunConfig& a, const RunConfig& b) {
    return a.model == b.model && a.synth == b.synth && a.train == b.train &&
           a.eval.skip_first == b.eval.skip_first &&
           a.eval.both_empty_iou == b.eval.both_empty_iou;
  }
};

struct ConfigKey {
  std::string key;
  std::string doc;
};

/// All recognised keys with a one-line description, in rendering order.
const std::vector<ConfigKey>& config_keys();

/// Applies `key = value` lines on top of `base`. Errors name the line.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Sets one key; throws std::invalid_argument for unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// Every key with its current value; parse_run_config(render(c)) == c.
std::string render_run_config(const RunConfig& cfg);

}  // namespace vl
