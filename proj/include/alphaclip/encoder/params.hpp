#pragma once

#include <string>
#include <vector>

#include "alphaclip/common.hpp"
#include "alphaclip/kv.hpp"

namespace alphaclip {

// Architecture of both towers. Defaults are the desk-scale model.
struct ArchConfig {
  int image_size = 32;
  int patch = 4;
  int width = 64;
  int layers = 4;
  int heads = 4;
  int mlp_ratio = 4;
  int embed_dim = 64;

  int text_width = 64;
  int text_layers = 2;
  int text_heads = 4;
  int context_length = 16;
  int vocab_size = 32;

  double temperature = 0.07;  // logits are cosine / temperature

  int grid() const { return image_size / patch; }
  int num_patches() const { return grid() * grid(); }
  int tokens() const { return num_patches() + 1; }

  // Throws ConfigError naming the first offending field.
  void validate() const;
  std::string to_text() const;
  static ArchConfig from_text(const std::string& text);
  // Applies one key; ConfigError on unknown keys or bad values.
  void set(const kv::Entry& e);
  bool operator==(const ArchConfig&) const = default;
};

struct LayerNormParams {
  Mat gain;  // 1 x d
  Mat bias;  // 1 x d
};

// Pre-norm residual block: x += attn(ln1(x)); x += mlp(ln2(x)).
struct BlockParams {
  LayerNormParams ln1;
  Mat w_qkv;  // d x 3d, columns [q | k | v]
  Mat b_qkv;  // 1 x 3d
  Mat w_out;  // d x d
  Mat b_out;  // 1 x d
  LayerNormParams ln2;
  Mat w_fc;    // d x m
  Mat b_fc;    // 1 x m
  Mat w_proj;  // m x d
  Mat b_proj;  // 1 x d
};

struct EncoderParams {
  ArchConfig arch;

  // Image tower. Patch kernels are (P*P*C) x D with row index (py*P + px)*C + c.
  Mat rgb_patch_kernel;
  Mat alpha_patch_kernel;
  Mat cls_token;  // 1 x D
  Mat pos_embed;  // (1 + N) x D
  LayerNormParams ln_pre;
  std::vector<BlockParams> blocks;
  LayerNormParams ln_post;
  Mat image_proj;  // D x E

  // Text tower.
  Mat token_embed;  // V x Dt
  Mat text_pos;     // context x Dt
  std::vector<BlockParams> text_blocks;
  LayerNormParams text_ln_final;
  Mat text_proj;  // Dt x E

  // Fixed; never visited as a tensor, so no optimizer can touch it.
  double temperature = 0.07;

  // All-zero tensors of the right shapes.
  static EncoderParams zeros(const ArchConfig& arch);
  // Random init with a zero alpha kernel.
  static EncoderParams init(const ArchConfig& arch, Rng& rng);

  template <class F>
  void for_each(F&& f);
  template <class F>
  void for_each(F&& f) const;

  void set_zero();
  std::size_t scalar_count() const;
};

bool is_norm_tensor(const std::string& name);
bool is_text_tensor(const std::string& name);

namespace detail {
template <class P, class F>
void visit_block(P& b, const std::string& prefix, F& f) {
  f(prefix + "ln1.gain", b.ln1.gain);
  f(prefix + "ln1.bias", b.ln1.bias);
  f(prefix + "attn.w_qkv", b.w_qkv);
  f(prefix + "attn.b_qkv", b.b_qkv);
  f(prefix + "attn.w_out", b.w_out);
  f(prefix + "attn.b_out", b.b_out);
  f(prefix + "ln2.gain", b.ln2.gain);
  f(prefix + "ln2.bias", b.ln2.bias);
  f(prefix + "mlp.w_fc", b.w_fc);
  f(prefix + "mlp.b_fc", b.b_fc);
  f(prefix + "mlp.w_proj", b.w_proj);
  f(prefix + "mlp.b_proj", b.b_proj);
}

template <class P, class F>
void visit_params(P& p, F& f) {
  f(std::string("visual.rgb_patch_kernel"), p.rgb_patch_kernel);
  f(std::string("visual.alpha_patch_kernel"), p.alpha_patch_kernel);
  f(std::string("visual.cls_token"), p.cls_token);
  f(std::string("visual.pos_embed"), p.pos_embed);
  f(std::string("visual.ln_pre.gain"), p.ln_pre.gain);
  f(std::string("visual.ln_pre.bias"), p.ln_pre.bias);
  for (std::size_t i = 0; i < p.blocks.size(); ++i)
    visit_block(p.blocks[i], "visual.blocks." + std::to_string(i) + ".", f);
  f(std::string("visual.ln_post.gain"), p.ln_post.gain);
  f(std::string("visual.ln_post.bias"), p.ln_post.bias);
  f(std::string("visual.proj"), p.image_proj);
  f(std::string("text.token_embed"), p.token_embed);
  f(std::string("text.pos_embed"), p.text_pos);
  for (std::size_t i = 0; i < p.text_blocks.size(); ++i)
    visit_block(p.text_blocks[i], "text.blocks." + std::to_string(i) + ".", f);
  f(std::string("text.ln_final.gain"), p.text_ln_final.gain);
  f(std::string("text.ln_final.bias"), p.text_ln_final.bias);
  f(std::string("text.proj"), p.text_proj);
}
}  // namespace detail

template <class F>
void EncoderParams::for_each(F&& f) {
  detail::visit_params(*this, f);
}

template <class F>
void EncoderParams::for_each(F&& f) const {
  detail::visit_params(*this, f);
}

}  // namespace alphaclip
