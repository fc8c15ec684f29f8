#include "alphaclip/encoder/params.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "alphaclip/kv.hpp"

namespace alphaclip {

void ArchConfig::validate() const {
  auto require = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(std::string(key) + ": " + what);
  };
  require(patch > 0, "patch", "must be positive");
  require(image_size > 0 && image_size % patch == 0, "image_size", "must be a positive multiple of patch");
  require(width > 0, "width", "must be positive");
  require(layers >= 1, "layers", "must be >= 1");
  require(heads > 0 && width % heads == 0, "heads", "must divide width");
  require(mlp_ratio > 0, "mlp_ratio", "must be positive");
  require(embed_dim > 0, "embed_dim", "must be positive");
  require(text_width > 0, "text_width", "must be positive");
  require(text_layers >= 1, "text_layers", "must be >= 1");
  require(text_heads > 0 && text_width % text_heads == 0, "text_heads", "must divide text_width");
  require(context_length >= 2, "context_length", "must be >= 2");
  require(vocab_size >= 3, "vocab_size", "must be >= 3");
  require(temperature > 0.0 && std::isfinite(temperature), "temperature", "must be positive");
}

std::string ArchConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "image_size = " << image_size << "\n"
     << "patch = " << patch << "\n"
     << "width = " << width << "\n"
     << "layers = " << layers << "\n"
     << "heads = " << heads << "\n"
     << "mlp_ratio = " << mlp_ratio << "\n"
     << "embed_dim = " << embed_dim << "\n"
     << "text_width = " << text_width << "\n"
     << "text_layers = " << text_layers << "\n"
     << "text_heads = " << text_heads << "\n"
     << "context_length = " << context_length << "\n"
     << "vocab_size = " << vocab_size << "\n"
     << "temperature = " << temperature << "\n";
  return os.str();
}

void ArchConfig::set(const kv::Entry& e) {
  const auto& k = e.key;
  if (k == "image_size") image_size = kv::to_int(e);
  else if (k == "patch") patch = kv::to_int(e);
  else if (k == "width") width = kv::to_int(e);
  else if (k == "layers") layers = kv::to_int(e);
  else if (k == "heads") heads = kv::to_int(e);
  else if (k == "mlp_ratio") mlp_ratio = kv::to_int(e);
  else if (k == "embed_dim") embed_dim = kv::to_int(e);
  else if (k == "text_width") text_width = kv::to_int(e);
  else if (k == "text_layers") text_layers = kv::to_int(e);
  else if (k == "text_heads") text_heads = kv::to_int(e);
  else if (k == "context_length") context_length = kv::to_int(e);
  else if (k == "vocab_size") vocab_size = kv::to_int(e);
  else if (k == "temperature") temperature = kv::to_double(e);
  else throw ConfigError("arch." + k + ": unknown key");
}

ArchConfig ArchConfig::from_text(const std::string& text) {
  ArchConfig a;
  for (const auto& e : kv::parse(text)) {
    if (!e.section.empty() && e.section != "arch") throw ConfigError("unexpected section [" + e.section + "]");
    a.set(e);
  }
  try {
    a.validate();
  } catch (const ConfigError& err) {
    throw ConfigError(std::string("arch.") + err.what());
  }
  return a;
}

namespace {

LayerNormParams ln_zeros(int d) { return {Mat::Zero(1, d), Mat::Zero(1, d)}; }

BlockParams block_zeros(int d, int m) {
  BlockParams b;
  b.ln1 = ln_zeros(d);
  b.w_qkv = Mat::Zero(d, 3 * d);
  b.b_qkv = Mat::Zero(1, 3 * d);
  b.w_out = Mat::Zero(d, d);
  b.b_out = Mat::Zero(1, d);
  b.ln2 = ln_zeros(d);
  b.w_fc = Mat::Zero(d, m);
  b.b_fc = Mat::Zero(1, m);
  b.w_proj = Mat::Zero(m, d);
  b.b_proj = Mat::Zero(1, d);
  return b;
}

void fill_normal(Mat& m, Rng& rng, double stddev) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * rng.normal();
}

void init_ln(LayerNormParams& ln) {
  ln.gain.setOnes();
  ln.bias.setZero();
}

void init_block(BlockParams& b, Rng& rng, int depth) {
  const double d = static_cast<double>(b.w_qkv.rows());
  const double attn_std = 1.0 / std::sqrt(d);
  const double proj_std = attn_std / std::sqrt(2.0 * depth);
  const double fc_std = 1.0 / std::sqrt(2.0 * d);
  init_ln(b.ln1);
  init_ln(b.ln2);
  fill_normal(b.w_qkv, rng, attn_std);
  fill_normal(b.w_out, rng, proj_std);
  fill_normal(b.w_fc, rng, fc_std);
  fill_normal(b.w_proj, rng, proj_std);
}

}  // namespace

EncoderParams EncoderParams::zeros(const ArchConfig& a) {
  a.validate();
  EncoderParams p;
  p.arch = a;
  const int pp = a.patch * a.patch;
  p.rgb_patch_kernel = Mat::Zero(pp * 3, a.width);
  p.alpha_patch_kernel = Mat::Zero(pp, a.width);
  p.cls_token = Mat::Zero(1, a.width);
  p.pos_embed = Mat::Zero(a.tokens(), a.width);
  p.ln_pre = ln_zeros(a.width);
  for (int i = 0; i < a.layers; ++i) p.blocks.push_back(block_zeros(a.width, a.width * a.mlp_ratio));
  p.ln_post = ln_zeros(a.width);
  p.image_proj = Mat::Zero(a.width, a.embed_dim);
  p.token_embed = Mat::Zero(a.vocab_size, a.text_width);
  p.text_pos = Mat::Zero(a.context_length, a.text_width);
  for (int i = 0; i < a.text_layers; ++i)
    p.text_blocks.push_back(block_zeros(a.text_width, a.text_width * a.mlp_ratio));
  p.text_ln_final = ln_zeros(a.text_width);
  p.text_proj = Mat::Zero(a.text_width, a.embed_dim);
  p.temperature = a.temperature;
  return p;
}

EncoderParams EncoderParams::init(const ArchConfig& a, Rng& rng) {
  EncoderParams p = zeros(a);
  const double dv = a.width;
  const double dt = a.text_width;
  fill_normal(p.rgb_patch_kernel, rng, 1.0 / std::sqrt(3.0 * a.patch * a.patch));
  fill_normal(p.cls_token, rng, 1.0 / std::sqrt(dv));
  fill_normal(p.pos_embed, rng, 1.0 / std::sqrt(dv));
  init_ln(p.ln_pre);
  for (auto& b : p.blocks) init_block(b, rng, a.layers);
  init_ln(p.ln_post);
  fill_normal(p.image_proj, rng, 1.0 / std::sqrt(dv));
  fill_normal(p.token_embed, rng, 0.5);
  fill_normal(p.text_pos, rng, 0.1);
  for (auto& b : p.text_blocks) init_block(b, rng, a.text_layers);
  init_ln(p.text_ln_final);
  fill_normal(p.text_proj, rng, 1.0 / std::sqrt(dt));
  // alpha_patch_kernel stays exactly zero.
  return p;
}

void EncoderParams::set_zero() {
  for_each([](const std::string&, Mat& m) { m.setZero(); });
}

std::size_t EncoderParams::scalar_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

bool is_norm_tensor(const std::string& name) {
  return name.find(".ln") != std::string::npos;
}

bool is_text_tensor(const std::string& name) { return name.rfind("text.", 0) == 0; }

}  // namespace alphaclip
