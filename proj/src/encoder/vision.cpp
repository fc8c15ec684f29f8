#include "alphaclip/encoder/vision.hpp"

#include <string>

namespace alphaclip {

namespace {

void check_finite(const Mat& m, const char* where, int layer) {
  if (!m.allFinite())
    throw NumericError(std::string("non-finite activation in ") + where +
                       (layer >= 0 ? " block " + std::to_string(layer) : std::string()));
}

void check_image_shape(const RgbaImage& image, const ArchConfig& arch) {
  validate(image);
  if (image.height != arch.image_size || image.width != arch.image_size)
    throw ShapeError("image is " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                     ", model expects " + std::to_string(arch.image_size) + "x" +
                     std::to_string(arch.image_size));
}

// Writes patches of one image into rows [row0, row0 + N).
void extract_patches(const RgbaImage& image, int patch, Mat& rgb, Mat* alpha, Eigen::Index row0) {
  const int grid = image.width / patch;
  for (int gy = 0; gy < image.height / patch; ++gy)
    for (int gx = 0; gx < grid; ++gx) {
      const Eigen::Index r = row0 + gy * grid + gx;
      for (int py = 0; py < patch; ++py)
        for (int px = 0; px < patch; ++px) {
          const int y = gy * patch + py;
          const int x = gx * patch + px;
          const int k = py * patch + px;
          for (int c = 0; c < 3; ++c) rgb(r, k * 3 + c) = image.at(y, x, c);
          if (alpha) (*alpha)(r, k) = image.a(y, x);
        }
    }
}

Mat patch_embed(const RgbaImage& image, const EncoderParams& params, bool use_alpha) {
  const auto& arch = params.arch;
  if (image.height % arch.patch != 0 || image.width % arch.patch != 0)
    throw ShapeError("image dimensions are not divisible by the patch size");
  validate(image);
  const int n = (image.height / arch.patch) * (image.width / arch.patch);
  const int pp = arch.patch * arch.patch;
  Mat rgb(n, pp * 3);
  Mat alpha(n, pp);
  extract_patches(image, arch.patch, rgb, &alpha, 0);
  Mat tokens = rgb * params.rgb_patch_kernel;
  if (use_alpha) tokens.noalias() += alpha * params.alpha_patch_kernel;
  return tokens;
}

}  // namespace

void validate_mask_for(const PooledMask& mask, const ArchConfig& arch) {
  if (mask.rows != arch.grid() || mask.cols != arch.grid() ||
      mask.cells.size() != static_cast<std::size_t>(arch.num_patches()))
    throw ShapeError("pooled mask " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
                     " does not match token grid " + std::to_string(arch.grid()));
  if (mask.all_zero()) throw InputError("pooled mask has no foreground cell");
}

Mat patch_embed_rgba(const RgbaImage& image, const EncoderParams& params) {
  return patch_embed(image, params, true);
}

Mat patch_embed_rgb(const RgbaImage& image, const EncoderParams& params) {
  return patch_embed(image, params, false);
}

Mat cls_attention_bias(const PooledMask& mask) {
  const int n = mask.rows * mask.cols;
  Mat bias = Mat::Zero(n + 1, n + 1);
  for (int i = 0; i < n; ++i)
    if (!mask.cells[i]) bias(0, i + 1) = nn::kMaskedLogit;
  return bias;
}

Mat encode_images(std::span<const RgbaImage> images, const EncoderParams& params,
                  const ImageEncodeOptions& options, VisionCache* cache) {
  const auto& arch = params.arch;
  const int batch = static_cast<int>(images.size());
  if (batch == 0) throw InputError("empty image batch");
  const int n = arch.num_patches();
  const int t = arch.tokens();
  const int d = arch.width;
  const int pp = arch.patch * arch.patch;

  if (!options.last_attention_masks.empty() &&
      options.last_attention_masks.size() != images.size())
    throw ShapeError("one last-attention mask per image required");
  if (!options.feature_masks.empty() && options.feature_masks.size() != images.size())
    throw ShapeError("one feature mask per image required");
  for (const auto& m : options.last_attention_masks) validate_mask_for(m, arch);
  for (const auto& m : options.feature_masks) validate_mask_for(m, arch);

  VisionCache local;
  VisionCache& c = cache ? *cache : local;
  c.batch = batch;
  c.patches_rgb.resize(static_cast<Eigen::Index>(batch) * n, pp * 3);
  c.patches_alpha.resize(static_cast<Eigen::Index>(batch) * n, pp);
  for (int b = 0; b < batch; ++b) {
    check_image_shape(images[b], arch);
    extract_patches(images[b], arch.patch, c.patches_rgb, &c.patches_alpha,
                    static_cast<Eigen::Index>(b) * n);
  }
  if (!options.use_alpha) c.patches_alpha.setZero();

  Mat tokens = c.patches_rgb * params.rgb_patch_kernel;
  if (options.use_alpha) tokens.noalias() += c.patches_alpha * params.alpha_patch_kernel;

  Mat x(static_cast<Eigen::Index>(batch) * t, d);
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * t;
    x.row(r0) = params.cls_token.row(0) + params.pos_embed.row(0);
    x.block(r0 + 1, 0, n, d) = tokens.block(static_cast<Eigen::Index>(b) * n, 0, n, d) +
                               params.pos_embed.bottomRows(n);
  }
  c.token_keep.assign(static_cast<std::size_t>(batch) * n, 1);
  if (!options.feature_masks.empty()) {
    for (int b = 0; b < batch; ++b)
      for (int i = 0; i < n; ++i)
        if (!options.feature_masks[b].cells[i]) {
          c.token_keep[static_cast<std::size_t>(b) * n + i] = 0;
          x.row(static_cast<Eigen::Index>(b) * t + 1 + i).setZero();
        }
  }

  x = nn::layer_norm(x, params.ln_pre, &c.ln_pre);

  std::vector<Mat> last_bias;
  for (const auto& m : options.last_attention_masks) last_bias.push_back(cls_attention_bias(m));

  c.blocks.resize(params.blocks.size());
  for (std::size_t l = 0; l < params.blocks.size(); ++l) {
    const bool last = l + 1 == params.blocks.size();
    x = nn::block_forward(x, t, arch.heads, params.blocks[l],
                          last ? nn::AttentionBias(last_bias) : nn::AttentionBias(), &c.blocks[l]);
    check_finite(x, "visual", static_cast<int>(l));
  }

  c.cls.resize(batch, d);
  for (int b = 0; b < batch; ++b) c.cls.row(b) = x.row(static_cast<Eigen::Index>(b) * t);
  c.cls_normed = nn::layer_norm(c.cls, params.ln_post, &c.ln_post);
  Mat z = c.cls_normed * params.image_proj;
  check_finite(z, "visual projection", -1);
  c.embeddings = nn::normalize_rows(z, &c.norms);
  return c.embeddings;
}

void backward_images(const Mat& d_embeddings, const EncoderParams& params, const VisionCache& c,
                     EncoderParams& grad, const VisionGradSpec& spec) {
  const auto& arch = params.arch;
  const int batch = c.batch;
  const int n = arch.num_patches();
  const int t = arch.tokens();
  const int d = arch.width;
  const int layers = static_cast<int>(params.blocks.size());
  auto block_trainable = [&](int l) { return spec.blocks.empty() || spec.blocks[l]; };

  Mat d_z = nn::normalize_rows_backward(d_embeddings, c.embeddings, c.norms);
  if (spec.head) grad.image_proj.noalias() += c.cls_normed.transpose() * d_z;
  Mat d_cls_normed = d_z * params.image_proj.transpose();
  Mat d_cls = nn::layer_norm_backward(d_cls_normed, params.ln_post, c.ln_post,
                                      spec.head ? &grad.ln_post : nullptr);

  const bool need_inputs = spec.alpha_kernel || spec.stem;
  int stop = layers;
  if (need_inputs) {
    stop = 0;
  } else {
    for (int l = 0; l < layers; ++l)
      if (block_trainable(l)) {
        stop = l;
        break;
      }
  }
  if (stop == layers) return;

  Mat dx = Mat::Zero(static_cast<Eigen::Index>(batch) * t, d);
  for (int b = 0; b < batch; ++b) dx.row(static_cast<Eigen::Index>(b) * t) = d_cls.row(b);
  for (int l = layers - 1; l >= stop; --l)
    dx = nn::block_backward(dx, t, arch.heads, params.blocks[l], c.blocks[l],
                            block_trainable(l) ? &grad.blocks[l] : nullptr);
  if (!need_inputs) return;

  dx = nn::layer_norm_backward(dx, params.ln_pre, c.ln_pre, spec.stem ? &grad.ln_pre : nullptr);

  Mat d_tokens(static_cast<Eigen::Index>(batch) * n, d);
  for (int b = 0; b < batch; ++b) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(b) * t;
    if (spec.stem) {
      grad.cls_token += dx.row(r0);
      grad.pos_embed.row(0) += dx.row(r0);
      grad.pos_embed.bottomRows(n) += dx.block(r0 + 1, 0, n, d);
    }
    d_tokens.block(static_cast<Eigen::Index>(b) * n, 0, n, d) = dx.block(r0 + 1, 0, n, d);
  }
  for (std::size_t i = 0; i < c.token_keep.size(); ++i)
    if (!c.token_keep[i]) d_tokens.row(static_cast<Eigen::Index>(i)).setZero();

  if (spec.stem) grad.rgb_patch_kernel.noalias() += c.patches_rgb.transpose() * d_tokens;
  if (spec.alpha_kernel) grad.alpha_patch_kernel.noalias() += c.patches_alpha.transpose() * d_tokens;
}

Embedding encode_image(const RgbaImage& image, const EncoderParams& params) {
  return encode_images(std::span(&image, 1), params).row(0);
}

Embedding encode_image_rgb(const RgbaImage& image, const EncoderParams& params) {
  ImageEncodeOptions opt;
  opt.use_alpha = false;
  return encode_images(std::span(&image, 1), params, opt).row(0);
}

Mat AttentionMap::head_grid(int head) const {
  Mat g(grid, grid);
  for (int i = 0; i < grid * grid; ++i) g(i / grid, i % grid) = weights(head, 1 + i);
  return g;
}

AttentionMap extract_cls_attention(const RgbaImage& image, const EncoderParams& params,
                                   const ImageEncodeOptions& options) {
  VisionCache cache;
  encode_images(std::span(&image, 1), params, options, &cache);
  const auto& probs = cache.blocks.back().probs;
  AttentionMap map;
  map.heads = params.arch.heads;
  map.grid = params.arch.grid();
  map.weights.resize(map.heads, params.arch.tokens());
  for (int h = 0; h < map.heads; ++h) map.weights.row(h) = probs[h].row(0);
  return map;
}

Embedding masked_last_attention_encode(const RgbaImage& image, const PooledMask& mask,
                                       const EncoderParams& params) {
  ImageEncodeOptions opt;
  opt.last_attention_masks = std::span(&mask, 1);
  return encode_images(std::span(&image, 1), params, opt).row(0);
}

Embedding feature_masked_encode(const RgbaImage& image, const PooledMask& mask,
                                const EncoderParams& params) {
  ImageEncodeOptions opt;
  opt.use_alpha = false;
  opt.feature_masks = std::span(&mask, 1);
  return encode_images(std::span(&image, 1), params, opt).row(0);
}

}  // namespace alphaclip
