#include "alphaclip/training/train.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "alphaclip/encoder/loss.hpp"
#include "alphaclip/encoder/text.hpp"

namespace alphaclip {

LossAndGrad contrastive_step(const EncoderParams& params, std::span<const RgbaImage> images,
                             std::span<const TokenIds> texts, const GradSpec& spec, const Mat* text_embeddings) {
  if (images.size() != texts.size()) throw InputError("image and text batch sizes differ");
  VisionCache vcache;
  const Mat img = encode_images(images, params, {}, &vcache);
  TextCache tcache;
  Mat txt;
  if (text_embeddings) {
    if (spec.text) throw InputError("text gradients need the text forward pass");
    txt = *text_embeddings;
  } else {
    txt = encode_texts(texts, params, spec.text ? &tcache : nullptr);
  }
  const ContrastiveResult r = contrastive_loss(img, txt, params.temperature);

  LossAndGrad out;
  out.loss = r.loss;
  out.grad = EncoderParams::zeros(params.arch);
  if (!std::isfinite(r.loss)) return out;
  backward_images(r.d_image, params, vcache, out.grad, spec.vision);
  if (spec.text) backward_texts(r.d_text, params, tcache, out.grad);
  return out;
}

std::string format_loss_record(const LossRecord& r, std::span<const ParamGroup> groups) {
  std::ostringstream os;
  os.precision(17);
  os << "step=" << r.step;
  for (std::size_t g = 0; g < r.lrs.size(); ++g)
    os << " lr." << (g < groups.size() ? groups[g].name : std::to_string(g)) << "=" << r.lrs[g];
  os << " loss=" << r.loss;
  return os.str();
}

std::string format_loss_log(std::span<const LossRecord> log, std::span<const ParamGroup> groups) {
  std::string out;
  for (const auto& r : log) out += format_loss_record(r, groups) + "\n";
  return out;
}

TrainState initial_state(EncoderParams params, const TrainConfig& cfg) {
  TrainState s;
  s.optimizer = OptimizerState::create(params, cfg);
  s.params = std::move(params);
  return s;
}

long total_steps_for(const TrainData& data, const TrainConfig& cfg) {
  if (cfg.total_steps > 0) return cfg.total_steps;
  const std::size_t pool = cfg.r_s >= 1.0 ? data.whole.size() : data.region.size();
  const long per_epoch = static_cast<long>((pool + static_cast<std::size_t>(cfg.batch) - 1) / cfg.batch);
  return std::max<long>(1, per_epoch) * cfg.epochs;
}

void train(const TrainData& data, const TrainConfig& cfg, TrainState& state, const TrainOptions& options) {
  const int layers = static_cast<int>(state.params.blocks.size());
  cfg.validate(layers);
  if (data.region.empty() && data.whole.empty()) throw InputError("training pool is empty");
  const auto groups = make_param_groups(state.params, cfg);
  const GradSpec spec = grad_spec_for(state.params, groups);
  const long total = total_steps_for(data, cfg);
  const StepOptions step_opts{cfg.weight_decay, cfg.decay_norms};

  // Frozen text tower: each distinct caption is encoded once.
  std::map<TokenIds, Vec> text_cache;

  auto abort = [&](const std::string& why) {
    if (options.abort_checkpoint) checkpoint_save(*options.abort_checkpoint, state, cfg);
    throw NumericError(why + (options.abort_checkpoint ? "; last good state saved to " +
                                                             options.abort_checkpoint->string()
                                                       : std::string()));
  };

  for (long s = state.optimizer.step; s < total; ++s) {
    if (options.stop_at && s >= *options.stop_at) break;
    Rng rng = Rng::stream(cfg.seed, "batch/" + std::to_string(s));
    const auto slots = sample_batch_slots(data.region.size(), data.whole.size(), cfg.r_s, cfg.batch, rng);
    std::vector<RgbaImage> images;
    std::vector<TokenIds> texts;
    images.reserve(slots.size());
    texts.reserve(slots.size());
    for (const auto& slot : slots) {
      const RgbaSample& smp = slot.whole ? data.whole[slot.index] : data.region[slot.index];
      images.push_back(smp.image);
      texts.push_back(smp.tokens);
    }

    std::vector<double> lrs;
    for (const auto& g : groups) lrs.push_back(g.trainable ? cosine_lr(s, total, g.lr) : 0.0);

    LossAndGrad lg;
    try {
      if (spec.text) {
        lg = contrastive_step(state.params, images, texts, spec);
      } else {
        Mat txt(static_cast<Eigen::Index>(texts.size()), state.params.arch.embed_dim);
        for (std::size_t i = 0; i < texts.size(); ++i) {
          auto it = text_cache.find(texts[i]);
          if (it == text_cache.end()) it = text_cache.emplace(texts[i], encode_text(texts[i], state.params)).first;
          txt.row(static_cast<Eigen::Index>(i)) = it->second;
        }
        lg = contrastive_step(state.params, images, texts, spec, &txt);
      }
    } catch (const NumericError& e) {
      abort("forward pass failed at step " + std::to_string(s + 1) + ": " + e.what());
    }
    if (!std::isfinite(lg.loss)) abort("loss diverged at step " + std::to_string(s + 1));
    try {
      optimizer_step(state.params, lg.grad, state.optimizer, groups, lrs, step_opts);
    } catch (const NumericError& e) {
      abort(e.what());
    }
    LossRecord rec{state.optimizer.step, lrs, lg.loss};
    state.log.push_back(rec);
    if (options.on_step) options.on_step(rec);
  }
}

}  // namespace alphaclip
