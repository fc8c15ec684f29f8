#pragma once

#include <span>
#include <vector>

#include "alphaclip/common.hpp"
#include "alphaclip/encoder/image.hpp"
#include "alphaclip/encoder/nn.hpp"
#include "alphaclip/encoder/params.hpp"

namespace alphaclip {

using Embedding = Vec;  // unit L2 norm

struct ImageEncodeOptions {
  // false routes patches through the RGB convolution only.
  bool use_alpha = true;
  // Per-image feature-grid masks restricting the CLS query of the final block.
  std::span<const PooledMask> last_attention_masks;
  // Per-image masks zeroing background tokens before the transformer.
  std::span<const PooledMask> feature_masks;
};

struct VisionCache {
  int batch = 0;
  Mat patches_rgb;    // (B*N) x (P*P*3)
  Mat patches_alpha;  // (B*N) x (P*P)
  std::vector<std::uint8_t> token_keep;  // B*N, 0 where feature-masked
  nn::LayerNormCache ln_pre;
  std::vector<nn::BlockCache> blocks;
  Mat cls;  // B x D, final CLS rows before ln_post
  nn::LayerNormCache ln_post;
  Mat cls_normed;
  Eigen::VectorXd norms;
  Mat embeddings;
};

// Which image-tower tensors need gradients.
struct VisionGradSpec {
  bool alpha_kernel = true;
  bool stem = true;  // rgb kernel, cls token, pos embed, ln_pre
  bool head = true;  // ln_post, projection
  std::vector<bool> blocks;  // empty means all

  static VisionGradSpec all() { return {}; }
};

// N x D token grid: rgb conv + alpha conv, both bias-free.
Mat patch_embed_rgba(const RgbaImage& image, const EncoderParams& params);
Mat patch_embed_rgb(const RgbaImage& image, const EncoderParams& params);

// B x E unit-norm embeddings. cache, when given, retains what backward needs.
Mat encode_images(std::span<const RgbaImage> images, const EncoderParams& params,
                  const ImageEncodeOptions& options = {}, VisionCache* cache = nullptr);

// Accumulates image-tower gradients for dL/d(embeddings) into grad.
void backward_images(const Mat& d_embeddings, const EncoderParams& params, const VisionCache& cache,
                     EncoderParams& grad, const VisionGradSpec& spec = VisionGradSpec::all());

Embedding encode_image(const RgbaImage& image, const EncoderParams& params);
Embedding encode_image_rgb(const RgbaImage& image, const EncoderParams& params);

// Per-head CLS-row attention of the last image block.
struct AttentionMap {
  int heads = 0;
  int grid = 0;
  Mat weights;  // heads x (1 + N); column 0 is the CLS key itself

  // Patch-token weights of one head reshaped to grid x grid.
  Mat head_grid(int head) const;
};

AttentionMap extract_cls_attention(const RgbaImage& image, const EncoderParams& params,
                                   const ImageEncodeOptions& options = {});

// Final block's CLS query sees only foreground patches (plus itself).
Embedding masked_last_attention_encode(const RgbaImage& image, const PooledMask& mask,
                                       const EncoderParams& params);

// RGB-only patch embedding with background tokens zeroed.
Embedding feature_masked_encode(const RgbaImage& image, const PooledMask& mask,
                                const EncoderParams& params);

// Seq x seq additive bias blocking CLS -> background patch logits.
Mat cls_attention_bias(const PooledMask& mask);

void validate_mask_for(const PooledMask& mask, const ArchConfig& arch);

}  // namespace alphaclip
