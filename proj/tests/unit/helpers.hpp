#pragma once

#include <filesystem>
#include <string>

#include "alphaclip/common.hpp"
#include "alphaclip/datagen/scene.hpp"
#include "alphaclip/encoder/params.hpp"
#include "alphaclip/encoder/text.hpp"

namespace testutil {

using namespace alphaclip;

inline ArchConfig tiny_arch(int image = 8, int patch = 2) {
  ArchConfig a;
  a.image_size = image;
  a.patch = patch;
  a.width = 8;
  a.layers = 2;
  a.heads = 2;
  a.mlp_ratio = 2;
  a.embed_dim = 6;
  a.text_width = 8;
  a.text_layers = 1;
  a.text_heads = 2;
  a.context_length = 12;
  a.vocab_size = 40;
  return a;
}

inline EncoderParams random_params(const ArchConfig& a, std::uint64_t seed = 1) {
  Rng rng(seed);
  return EncoderParams::init(a, rng);
}

inline RgbaImage random_image(int h, int w, Rng& rng, bool random_alpha = true) {
  RgbaImage im(h, w);
  for (auto& v : im.rgb) v = rng.uniform();
  if (random_alpha)
    for (auto& v : im.alpha) v = rng.uniform();
  return im;
}

inline BinaryMask random_mask(int h, int w, Rng& rng, double p = 0.3) {
  BinaryMask m(h, w);
  for (auto& b : m.bits) b = rng.bernoulli(p) ? 1 : 0;
  return m;
}

inline Vocabulary test_vocab(const SceneSpec& spec = {}) { return Vocabulary(corpus_words(spec)); }

// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("alphaclip_test_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

inline std::uint64_t hash_mat(const Mat& m) {
  Fnv1a64 h;
  h.update(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double));
  return h.digest();
}

}  // namespace testutil
