#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "alphaclip/training/train.hpp"

namespace alphaclip {

std::vector<std::pair<std::string, Mat*>> named_tensors(EncoderParams& p) {
  std::vector<std::pair<std::string, Mat*>> out;
  p.for_each([&](const std::string& name, Mat& m) { out.emplace_back(name, &m); });
  return out;
}

std::vector<std::pair<std::string, const Mat*>> named_tensors(const EncoderParams& p) {
  std::vector<std::pair<std::string, const Mat*>> out;
  p.for_each([&](const std::string& name, const Mat& m) { out.emplace_back(name, &m); });
  return out;
}

namespace {

bool is_stem(const std::string& n) {
  return n == "visual.rgb_patch_kernel" || n == "visual.cls_token" || n == "visual.pos_embed" ||
         n.rfind("visual.ln_pre.", 0) == 0;
}
bool is_head(const std::string& n) { return n == "visual.proj" || n.rfind("visual.ln_post.", 0) == 0; }

// Image block index of a tensor name, or -1.
int image_block_of(const std::string& n) {
  static const std::string prefix = "visual.blocks.";
  if (n.rfind(prefix, 0) != 0) return -1;
  return std::stoi(n.substr(prefix.size()));
}

}  // namespace

std::vector<ParamGroup> make_param_groups(const EncoderParams& params, const TrainConfig& cfg) {
  const int layers = static_cast<int>(params.blocks.size());
  if (cfg.unfreeze_blocks > layers)
    throw InputError("unfreeze_blocks " + std::to_string(cfg.unfreeze_blocks) + " exceeds " +
                     std::to_string(layers) + " image blocks");
  if (cfg.unfreeze_blocks < -1) throw InputError("unfreeze_blocks must be -1 or >= 0");

  if (cfg.stage == TrainStage::Pretrain) {
    ParamGroup alpha{"alpha", {}, cfg.lr_alpha, false};
    ParamGroup image{"image", {}, cfg.lr_rest, true};
    ParamGroup text{"text", {}, cfg.lr_rest, true};
    params.for_each([&](const std::string& n, const Mat&) {
      if (n == "visual.alpha_patch_kernel") alpha.tensors.push_back(n);
      else if (is_text_tensor(n)) text.tensors.push_back(n);
      else image.tensors.push_back(n);
    });
    return {alpha, image, text};
  }

  const int k = cfg.resolved_unfreeze(layers);
  ParamGroup alpha{"alpha", {}, cfg.lr_alpha, true};
  ParamGroup image{"image", {}, cfg.lr_rest, true};
  ParamGroup frozen{"frozen", {}, 0.0, false};
  params.for_each([&](const std::string& n, const Mat&) {
    if (n == "visual.alpha_patch_kernel") {
      alpha.tensors.push_back(n);
      return;
    }
    bool train = false;
    if (k >= 1 && !is_text_tensor(n)) {
      const int b = image_block_of(n);
      train = b >= 0 ? b >= layers - k : (is_stem(n) || is_head(n));
    }
    (train ? image : frozen).tensors.push_back(n);
  });
  return {alpha, image, frozen};
}

double cosine_lr(long step, long total, double base) {
  if (total <= 0) throw InputError("cosine schedule needs total steps > 0");
  if (step < 0 || step > total) throw InputError("step " + std::to_string(step) + " outside [0, T]");
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / static_cast<double>(total)));
}

OptimizerState OptimizerState::create(const EncoderParams& params, const TrainConfig& cfg) {
  OptimizerState s;
  s.m = EncoderParams::zeros(params.arch);
  s.v = EncoderParams::zeros(params.arch);
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.eps = cfg.eps;
  return s;
}

void optimizer_step(EncoderParams& params, const EncoderParams& grads, OptimizerState& state,
                    std::span<const ParamGroup> groups, std::span<const double> lrs, const StepOptions& options) {
  if (lrs.size() != groups.size()) throw InputError("one learning rate per parameter group required");
  std::map<std::string, std::size_t> group_of;
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (const auto& n : groups[g].tensors) group_of[n] = g;

  auto p = named_tensors(params);
  const auto gr = named_tensors(grads);
  auto m = named_tensors(state.m);
  auto v = named_tensors(state.v);
  if (gr.size() != p.size() || m.size() != p.size() || v.size() != p.size())
    throw ShapeError("gradient or moment tensor set does not match parameters");

  auto trainable = [&](std::size_t i) {
    const auto it = group_of.find(p[i].first);
    return it != group_of.end() && groups[it->second].trainable;
  };
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Mat& g = *gr[i].second;
    if (g.rows() != p[i].second->rows() || g.cols() != p[i].second->cols() ||
        m[i].second->rows() != g.rows() || m[i].second->cols() != g.cols())
      throw ShapeError("gradient shape mismatch for " + p[i].first);
    if (trainable(i) && !g.allFinite()) {
      Eigen::Index bad = 0;
      for (Eigen::Index j = 0; j < g.size(); ++j)
        if (!std::isfinite(g.data()[j])) {
          bad = j;
          break;
        }
      throw NumericError("non-finite gradient in " + p[i].first + " at flat index " + std::to_string(bad) +
                         " (step " + std::to_string(state.step + 1) + "), step aborted");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!trainable(i)) continue;
    const double lr = lrs[group_of[p[i].first]];
    Mat& w = *p[i].second;
    const Mat& g = *gr[i].second;
    Mat& mi = *m[i].second;
    Mat& vi = *v[i].second;
    if (options.weight_decay != 0.0 && (options.decay_norms || !is_norm_tensor(p[i].first)))
      w *= 1.0 - lr * options.weight_decay;
    mi = state.beta1 * mi + (1.0 - state.beta1) * g;
    vi = state.beta2 * vi + (1.0 - state.beta2) * g.cwiseProduct(g);
    w.array() -= lr * (mi.array() / c1) / ((vi.array() / c2).sqrt() + state.eps);
  }
}

GradSpec grad_spec_for(const EncoderParams& params, std::span<const ParamGroup> groups) {
  std::set<std::string> live;
  for (const auto& g : groups)
    if (g.trainable) live.insert(g.tensors.begin(), g.tensors.end());
  GradSpec s;
  const int layers = static_cast<int>(params.blocks.size());
  s.vision.alpha_kernel = live.count("visual.alpha_patch_kernel") > 0;
  s.vision.stem = false;
  s.vision.head = false;
  s.vision.blocks.assign(static_cast<std::size_t>(layers), false);
  for (const auto& n : live) {
    if (is_text_tensor(n)) s.text = true;
    else if (is_stem(n)) s.vision.stem = true;
    else if (is_head(n)) s.vision.head = true;
    else if (const int b = image_block_of(n); b >= 0) s.vision.blocks[static_cast<std::size_t>(b)] = true;
  }
  return s;
}

}  // namespace alphaclip
