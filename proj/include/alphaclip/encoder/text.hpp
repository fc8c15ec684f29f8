#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "alphaclip/common.hpp"
#include "alphaclip/encoder/nn.hpp"
#include "alphaclip/encoder/params.hpp"
#include "alphaclip/encoder/vision.hpp"

namespace alphaclip {

using TokenIds = std::vector<int>;

// Closed word-level vocabulary. Ids 0..2 are <pad>, <sot>, <eot>; commas
// are split off as their own token.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kSot = 1;
  static constexpr int kEot = 2;

  explicit Vocabulary(const std::vector<std::string>& words);

  int size() const { return static_cast<int>(words_.size()); }
  const std::string& word(int id) const { return words_.at(id); }
  const std::vector<std::string>& words() const { return words_; }

  // <sot> words... <eot>. Throws InputError on unknown words or when the
  // result would exceed context_length.
  TokenIds encode(const std::string& text, int context_length) const;
  std::string decode(const TokenIds& ids) const;

 private:
  std::vector<std::string> words_;
  std::map<std::string, int> index_;
};

struct TextCache {
  struct Sequence {
    TokenIds ids;
    std::vector<nn::BlockCache> blocks;
  };
  std::vector<Sequence> sequences;
  Mat pooled;
  nn::LayerNormCache ln_final;
  Mat pooled_normed;
  Eigen::VectorXd norms;
  Mat embeddings;
};

// Each sequence is run on its own so an embedding never depends on batch
// composition. Pooling takes the final (<eot>) position under causal masking.
Mat encode_texts(std::span<const TokenIds> texts, const EncoderParams& params,
                 TextCache* cache = nullptr);

void backward_texts(const Mat& d_embeddings, const EncoderParams& params, const TextCache& cache,
                    EncoderParams& grad);

Embedding encode_text(const TokenIds& tokens, const EncoderParams& params);

}  // namespace alphaclip
