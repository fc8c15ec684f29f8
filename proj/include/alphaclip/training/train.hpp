#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alphaclip/datagen/sample.hpp"
#include "alphaclip/encoder/params.hpp"
#include "alphaclip/encoder/vision.hpp"
#include "alphaclip/kv.hpp"

namespace alphaclip {

enum class TrainStage {
  // Text tower frozen, alpha kernel at lr_alpha, image tower at lr_rest.
  AlphaFinetune,
  // Contrastive pretraining of both towers with the alpha kernel held at zero.
  Pretrain,
};

struct TrainConfig {
  TrainStage stage = TrainStage::AlphaFinetune;
  double r_s = 0.1;
  double lr_alpha = 2e-4;
  double lr_rest = 2e-6;
  double weight_decay = 2e-2;
  int unfreeze_blocks = -1;  // -1 = every image block
  int epochs = 20;
  int batch = 64;
  std::uint64_t seed = 0;
  int total_steps = 0;  // 0 = epochs * ceil(pool / batch)
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  bool decay_norms = false;

  int resolved_unfreeze(int layers) const { return unfreeze_blocks < 0 ? layers : unfreeze_blocks; }
  // ConfigError naming the key. layers < 0 skips the unfreeze bound.
  void validate(int layers = -1) const;
  std::string to_text() const;
  static TrainConfig from_text(const std::string& text);
  void set(const kv::Entry& e);
  bool operator==(const TrainConfig&) const = default;
};

struct ParamGroup {
  std::string name;
  std::vector<std::string> tensors;
  double lr = 0.0;
  bool trainable = false;
};

// Fine-tune: "alpha" (alpha kernel), "image" (last k blocks plus stem and
// head when k >= 1), "frozen" (everything else including the text tower).
// Pretrain: "alpha" frozen, "image" and "text" trainable at lr_rest.
std::vector<ParamGroup> make_param_groups(const EncoderParams& params, const TrainConfig& cfg);

double cosine_lr(long step, long total, double base);

struct OptimizerState {
  EncoderParams m;
  EncoderParams v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;

  static OptimizerState create(const EncoderParams& params, const TrainConfig& cfg);
};

struct StepOptions {
  double weight_decay = 0.0;
  bool decay_norms = false;
};

// AdamW with decoupled decay p <- p - lr*wd*p applied before the adaptive
// term. lrs[i] belongs to groups[i]; frozen groups are untouched. A
// non-finite gradient in a trainable tensor throws NumericError before
// anything is modified.
void optimizer_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                    std::span<const ParamGroup> groups, std::span<const double> lrs, const StepOptions& options);

// Which gradients a step needs.
struct GradSpec {
  VisionGradSpec vision;
  bool text = false;
};
GradSpec grad_spec_for(const EncoderParams& params, std::span<const ParamGroup> groups);

struct LossAndGrad {
  double loss = 0.0;
  EncoderParams grad;
};

// Contrastive loss of a batch and gradients for every tensor spec asks for.
// text_embeddings, when given, replaces the text forward (frozen tower).
LossAndGrad contrastive_step(const EncoderParams& params, std::span<const RgbaImage> images,
                             std::span<const TokenIds> texts, const GradSpec& spec,
                             const Mat* text_embeddings = nullptr);

struct LossRecord {
  long step = 0;
  std::vector<double> lrs;
  double loss = 0.0;
  bool operator==(const LossRecord&) const = default;
};
std::string format_loss_record(const LossRecord& r, std::span<const ParamGroup> groups);
std::string format_loss_log(std::span<const LossRecord> log, std::span<const ParamGroup> groups);

struct TrainState {
  EncoderParams params;
  OptimizerState optimizer;
  std::vector<LossRecord> log;
};

TrainState initial_state(EncoderParams params, const TrainConfig& cfg);

struct TrainData {
  std::span<const RgbaSample> region;
  std::span<const RgbaSample> whole;
};

long total_steps_for(const TrainData& data, const TrainConfig& cfg);

struct TrainOptions {
  // Stop once this many optimizer steps have been taken (for interrupted runs).
  std::optional<long> stop_at;
  // Where the last good state is written if the loss diverges.
  std::optional<std::filesystem::path> abort_checkpoint;
  std::function<void(const LossRecord&)> on_step;
};

// Runs steps state.optimizer.step .. T-1. Batches come from a per-step RNG
// stream so a resumed run sees the same batches as an unbroken one.
void train(const TrainData& data, const TrainConfig& cfg, TrainState& state, const TrainOptions& options = {});

void checkpoint_save(const std::filesystem::path& path, const TrainState& state, const TrainConfig& cfg);
struct LoadedCheckpoint {
  TrainState state;
  TrainConfig config;
};
LoadedCheckpoint checkpoint_load(const std::filesystem::path& path);
LoadedCheckpoint checkpoint_load(const std::filesystem::path& path, const ArchConfig& expected);

struct GradCheckEntry {
  std::string tensor;
  int checked = 0;
  double max_rel_error = 0.0;
  double max_abs_analytic = 0.0;
  double max_abs_numeric = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::vector<GradCheckEntry> tensors;
};

struct GradCheckOptions {
  double eps = 1e-5;
  int samples_per_tensor = 6;
  // Coordinates where both gradients are below this are compared absolutely.
  double abs_floor = 1e-6;
  std::vector<std::string> full_tensors{"visual.alpha_patch_kernel"};
  std::uint64_t seed = 0;
};

// Central differences on a sampled subset of each listed tensor (and every
// coordinate of full_tensors) against the analytic gradient.
GradCheckReport grad_check(EncoderParams params, const std::function<double(const EncoderParams&)>& loss,
                           const EncoderParams& analytic, std::span<const std::string> tensors,
                           const GradCheckOptions& options = {});

std::vector<std::pair<std::string, Mat*>> named_tensors(EncoderParams& p);
std::vector<std::pair<std::string, const Mat*>> named_tensors(const EncoderParams& p);

}  // namespace alphaclip
