#pragma once

#include "alphaclip/common.hpp"

namespace alphaclip {

struct ContrastiveResult {
  double loss = 0.0;
  Mat d_image;  // dL / d(image embeddings)
  Mat d_text;   // dL / d(text embeddings)
};

// Symmetric InfoNCE over the n x n cosine matrix scaled by 1/temperature;
// row i of each input is a matched pair.
ContrastiveResult contrastive_loss(const Mat& image, const Mat& text, double temperature);

}  // namespace alphaclip
