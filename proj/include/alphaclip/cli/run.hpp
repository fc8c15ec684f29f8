#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "alphaclip/datagen/scene.hpp"
#include "alphaclip/encoder/params.hpp"
#include "alphaclip/evaluation/eval.hpp"
#include "alphaclip/training/train.hpp"

namespace alphaclip::cli {

struct DataConfig {
  int train_scenes = 3000;
  int eval_scenes = 300;
  int eval_min_shapes = 2;  // evaluation scenes always contain a distractor

  bool operator==(const DataConfig&) const = default;
};

struct EvalConfig {
  // Matches the corpus grammar, so captions and prompts share vocabulary.
  std::vector<std::string> templates{"a {name}"};
  int viz_scene = 0;
  int viz_region = 0;
  int viz_scale = 8;
  double red_circle_stroke = 1.0;
  double red_circle_enlarge = 1.1;

  bool operator==(const EvalConfig&) const = default;
};

struct PathConfig {
  std::string out = "runs";
  std::string data;        // directory with region.shard / whole.shard; empty = generate
  std::string init;        // starting parameters (train)
  std::string resume;      // training checkpoint to continue
  std::string checkpoint;  // model under evaluation
  std::string base;        // original model for baselines and the crop reference

  bool operator==(const PathConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  ArchConfig arch;
  SceneSpec scene;
  TrainConfig train;
  PreprocessSpec preprocess;
  DataConfig data;
  EvalConfig eval;
  PathConfig paths;

  bool operator==(const RunConfig&) const = default;
};

// Sections: [run] seed; [arch]; [scene]; [train]; [preprocess]; [data];
// [eval]; [paths]. Unknown sections or keys, type mismatches and invariant
// violations throw ConfigError naming the key.
RunConfig parse_config(const std::string& text);
std::string serialize_config(const RunConfig& cfg);
void validate(const RunConfig& cfg);
// Applies one "section.key" override.
void apply_override(RunConfig& cfg, const std::string& dotted_key, const std::string& value);

// Hash of the canonical serialisation, used to name run directories.
std::string config_hash(const RunConfig& cfg, const std::string& command);

enum ExitCode : int { kOk = 0, kUsage = 2, kConfig = 3, kInput = 4, kRuntime = 5 };

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string status = "incomplete";
  std::vector<std::pair<std::string, std::string>> artifacts;
  std::vector<std::pair<std::string, double>> timings;
  std::string to_text() const;
};

struct DispatchResult {
  int exit_code = kOk;
  std::filesystem::path run_dir;
  std::string message;
};

const std::vector<std::string>& commands();

// Runs one command under <paths.out>/<command>-<hash>/. Inputs are checked
// before the directory is created; the manifest is written first marked
// incomplete and rewritten complete at the end.
DispatchResult dispatch(const std::string& command, RunConfig cfg);

// Full command-line entry point (argv[1] = command).
int run_main(int argc, char** argv);

}  // namespace alphaclip::cli
