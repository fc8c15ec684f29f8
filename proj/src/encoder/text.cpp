#include "alphaclip/encoder/text.hpp"

#include <cctype>
#include <sstream>

namespace alphaclip {

Vocabulary::Vocabulary(const std::vector<std::string>& words)
    : words_{"<pad>", "<sot>", "<eot>"} {
  for (int i = 0; i < static_cast<int>(words_.size()); ++i) index_[words_[i]] = i;
  for (const auto& w : words)
    if (index_.emplace(w, static_cast<int>(words_.size())).second) words_.push_back(w);
}

TokenIds Vocabulary::encode(const std::string& text, int context_length) const {
  std::string spaced;
  for (char ch : text) {
    if (ch == ',') {
      spaced += " , ";
    } else {
      spaced += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    }
  }
  TokenIds ids{kSot};
  std::istringstream is(spaced);
  std::string w;
  while (is >> w) {
    auto it = index_.find(w);
    if (it == index_.end()) throw InputError("word '" + w + "' is not in the vocabulary");
    ids.push_back(it->second);
  }
  ids.push_back(kEot);
  if (static_cast<int>(ids.size()) > context_length)
    throw InputError("caption '" + text + "' needs " + std::to_string(ids.size()) +
                     " tokens, context is " + std::to_string(context_length));
  return ids;
}

std::string Vocabulary::decode(const TokenIds& ids) const {
  std::string out;
  for (int id : ids) {
    if (id == kSot || id == kEot || id == kPad) continue;
    const auto& w = word(id);
    if (w == ",") {
      out += ",";
      continue;
    }
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

namespace {

Mat causal_bias(int t) {
  Mat b = Mat::Zero(t, t);
  for (int i = 0; i < t; ++i)
    for (int j = i + 1; j < t; ++j) b(i, j) = nn::kMaskedLogit;
  return b;
}

void check_tokens(const TokenIds& ids, const ArchConfig& arch) {
  if (ids.empty()) throw InputError("empty token sequence");
  if (static_cast<int>(ids.size()) > arch.context_length)
    throw InputError("token sequence longer than context length " + std::to_string(arch.context_length));
  for (int id : ids)
    if (id < 0 || id >= arch.vocab_size)
      throw InputError("token id " + std::to_string(id) + " is outside the vocabulary");
}

}  // namespace

Mat encode_texts(std::span<const TokenIds> texts, const EncoderParams& params, TextCache* cache) {
  const auto& arch = params.arch;
  const auto batch = static_cast<Eigen::Index>(texts.size());
  if (batch == 0) throw InputError("empty text batch");
  TextCache local;
  TextCache& c = cache ? *cache : local;
  c.sequences.assign(texts.size(), {});
  c.pooled.resize(batch, arch.text_width);

  for (Eigen::Index s = 0; s < batch; ++s) {
    const auto& ids = texts[s];
    check_tokens(ids, arch);
    const int t = static_cast<int>(ids.size());
    Mat x(t, arch.text_width);
    for (int i = 0; i < t; ++i) x.row(i) = params.token_embed.row(ids[i]) + params.text_pos.row(i);
    const Mat bias = causal_bias(t);
    auto& seq = c.sequences[s];
    seq.ids = ids;
    seq.blocks.resize(params.text_blocks.size());
    for (std::size_t l = 0; l < params.text_blocks.size(); ++l) {
      x = nn::block_forward(x, t, arch.text_heads, params.text_blocks[l], nn::AttentionBias(&bias, 1),
                            &seq.blocks[l]);
      if (!x.allFinite())
        throw NumericError("non-finite activation in text block " + std::to_string(l));
    }
    c.pooled.row(s) = x.row(t - 1);
  }
  c.pooled_normed = nn::layer_norm(c.pooled, params.text_ln_final, &c.ln_final);
  Mat z = c.pooled_normed * params.text_proj;
  if (!z.allFinite()) throw NumericError("non-finite activation in text projection");
  c.embeddings = nn::normalize_rows(z, &c.norms);
  return c.embeddings;
}

void backward_texts(const Mat& d_embeddings, const EncoderParams& params, const TextCache& c,
                    EncoderParams& grad) {
  const auto& arch = params.arch;
  Mat d_z = nn::normalize_rows_backward(d_embeddings, c.embeddings, c.norms);
  grad.text_proj.noalias() += c.pooled_normed.transpose() * d_z;
  Mat d_pooled = nn::layer_norm_backward(d_z * params.text_proj.transpose(), params.text_ln_final,
                                         c.ln_final, &grad.text_ln_final);
  for (std::size_t s = 0; s < c.sequences.size(); ++s) {
    const auto& seq = c.sequences[s];
    const int t = static_cast<int>(seq.ids.size());
    Mat dx = Mat::Zero(t, arch.text_width);
    dx.row(t - 1) = d_pooled.row(static_cast<Eigen::Index>(s));
    for (int l = static_cast<int>(params.text_blocks.size()) - 1; l >= 0; --l)
      dx = nn::block_backward(dx, t, arch.text_heads, params.text_blocks[l], seq.blocks[l],
                              &grad.text_blocks[l]);
    for (int i = 0; i < t; ++i) {
      grad.token_embed.row(seq.ids[i]) += dx.row(i);
      grad.text_pos.row(i) += dx.row(i);
    }
  }
}

Embedding encode_text(const TokenIds& tokens, const EncoderParams& params) {
  return encode_texts(std::span(&tokens, 1), params).row(0);
}

}  // namespace alphaclip
