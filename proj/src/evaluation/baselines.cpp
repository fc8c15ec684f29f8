#include <algorithm>
#include <cmath>

#include "alphaclip/datagen/mask.hpp"
#include "alphaclip/evaluation/eval.hpp"

namespace alphaclip {

RgbaImage image_level_mask_baseline(const RgbaImage& image, const BinaryMask& mask, const Rgb& fill) {
  return with_full_alpha(composite_on(image, mask, fill));
}

BinaryMask red_circle_annulus(const Box& box, int height, int width, const RedCircleStyle& style) {
  if (!box.valid_in(height, width)) throw InputError("red circle box outside image or zero area");
  const double cx = 0.5 * (box.x0 + box.x1), cy = 0.5 * (box.y0 + box.y1);
  const double a = 0.5 * box.width() * style.enlarge, b = 0.5 * box.height() * style.enlarge;
  const double scale = std::sqrt(a * b);
  BinaryMask m(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = (x + 0.5 - cx) / a, dy = (y + 0.5 - cy) / b;
      const double d = std::sqrt(dx * dx + dy * dy);
      m(y, x) = std::abs(d - 1.0) * scale <= 0.5 * style.stroke;
    }
  return m;
}

RgbaImage red_circle_baseline(const RgbaImage& image, const Box& box, const RedCircleStyle& style) {
  const BinaryMask ring = red_circle_annulus(box, image.height, image.width, style);
  RgbaImage out = with_full_alpha(image);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (ring(y, x))
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = std::clamp(style.color[c], 0.0, 1.0);
  return out;
}

Rgb dataset_mean_color(const RegionEvalSet& set) {
  Rgb m{};
  if (set.scenes.empty()) return m;
  for (const auto& s : set.scenes) {
    const Rgb c = mean_color(s);
    for (int k = 0; k < 3; ++k) m[k] += c[k];
  }
  for (auto& v : m) v /= static_cast<double>(set.scenes.size());
  return m;
}

std::vector<BaselineRow> compare_baselines(const RegionEvalSet& set, const ClassPromptSet& original_prompts,
                                           const EncoderParams& original, const ClassPromptSet& alpha_prompts,
                                           const EncoderParams& alpha_tuned, const BaselineOptions& options) {
  const Rgb fill = options.fill.value_or(dataset_mean_color(set));
  const auto n = static_cast<Eigen::Index>(set.items.size());
  std::vector<int> labels;
  for (const auto& it : set.items) labels.push_back(it.label);

  Mat plain(n, original.arch.embed_dim), masked(n, original.arch.embed_dim), circle(n, original.arch.embed_dim),
      last_attn(n, original.arch.embed_dim), feature(n, original.arch.embed_dim), alpha(n, alpha_tuned.arch.embed_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const RegionItem& it = set.items[static_cast<std::size_t>(i)];
    const RgbaImage whole = with_full_alpha(set.scenes[it.scene]);
    const PooledMask pm = pool_mask(it.mask, original.arch.patch);
    plain.row(i) = encode_image(whole, original);
    masked.row(i) = encode_image(image_level_mask_baseline(whole, it.mask, fill), original);
    circle.row(i) = encode_image(red_circle_baseline(whole, it.box, options.red_circle), original);
    last_attn.row(i) = masked_last_attention_encode(whole, pm, original);
    feature.row(i) = feature_masked_encode(whole, pm, original);
    alpha.row(i) = encode_image(with_alpha(whole, it.mask), alpha_tuned);
  }
  return {
      {"Original CLIP", classify_embeddings(plain, labels, original_prompts.embeddings)},
      {"MaskAdaptedCLIP", classify_embeddings(masked, labels, original_prompts.embeddings)},
      {"Red Circle", classify_embeddings(circle, labels, original_prompts.embeddings)},
      {"MaskCLIP*", classify_embeddings(last_attn, labels, original_prompts.embeddings)},
      {"Feature masking", classify_embeddings(feature, labels, original_prompts.embeddings)},
      {"Alpha-CLIP", classify_embeddings(alpha, labels, alpha_prompts.embeddings)},
  };
}

}  // namespace alphaclip
