#pragma once

#include <span>
#include <vector>

#include "alphaclip/common.hpp"
#include "alphaclip/encoder/params.hpp"

namespace alphaclip::nn {

// Additive attention logits bias used for -inf style masking.
inline constexpr double kMaskedLogit = -1e9;

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd rstd;
};

Mat layer_norm(const Mat& x, const LayerNormParams& p, LayerNormCache* cache);
// Accumulates into grad when non-null; returns dL/dx.
Mat layer_norm_backward(const Mat& dy, const LayerNormParams& p, const LayerNormCache& cache,
                        LayerNormParams* grad);

// Sigmoid-gated GELU approximation x * sigmoid(1.702 x).
inline constexpr double kGeluSlope = 1.702;
double gelu(double x);
double gelu_grad(double x);
Mat gelu(const Mat& x);
Mat gelu_grad(const Mat& x);

// Row-wise softmax, in place.
void softmax_rows(Mat& logits);

// Rows of x are tokens of consecutive sequences of length seq_len. bias holds
// zero, one (shared) or one-per-sequence seq_len x seq_len additive logits.
using AttentionBias = std::span<const Mat>;

struct BlockCache {
  LayerNormCache ln1;
  Mat h1;
  Mat qkv;
  std::vector<Mat> probs;  // sequence-major, then head
  Mat ctx;
  Mat x_mid;
  LayerNormCache ln2;
  Mat h2;
  Mat fc_pre;
  Mat fc_act;
};

Mat block_forward(const Mat& x, int seq_len, int heads, const BlockParams& p, AttentionBias bias,
                  BlockCache* cache);

// grad == nullptr skips weight gradients (frozen block) but still returns dL/dx.
Mat block_backward(const Mat& dy, int seq_len, int heads, const BlockParams& p, const BlockCache& cache,
                   BlockParams* grad);

// Attention probabilities of a single block without running the rest.
std::vector<Mat> attention_probs(const Mat& x, int seq_len, int heads, const BlockParams& p,
                                 AttentionBias bias);

// L2 normalization of each row and its backward pass.
Mat normalize_rows(const Mat& z, Eigen::VectorXd* norms);
Mat normalize_rows_backward(const Mat& de, const Mat& e, const Eigen::VectorXd& norms);

}  // namespace alphaclip::nn
