#include "alphaclip/encoder/loss.hpp"

#include <cmath>

namespace alphaclip {

namespace {

// Softmax per row of logits; returns sum of -log p(target=i) over rows.
double row_cross_entropy(const Mat& logits, Mat& probs) {
  double total = 0.0;
  probs.resize(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    probs.row(i) = (logits.row(i).array() - mx).exp();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    total += mx + std::log(z) - logits(i, i);
  }
  return total;
}

}  // namespace

ContrastiveResult contrastive_loss(const Mat& image, const Mat& text, double temperature) {
  const auto n = image.rows();
  if (n == 0) throw InputError("contrastive loss needs at least one pair");
  if (text.rows() != n || text.cols() != image.cols())
    throw ShapeError("image and text embedding batches differ in shape");
  if (!(temperature > 0.0)) throw InputError("temperature must be positive");

  const Mat logits = (image * text.transpose()) / temperature;
  Mat p_img, p_txt;
  const double l_img = row_cross_entropy(logits, p_img);
  const Mat logits_t = logits.transpose();
  const double l_txt = row_cross_entropy(logits_t, p_txt);

  const double nn = static_cast<double>(n);
  ContrastiveResult r;
  r.loss = 0.5 * (l_img + l_txt) / nn;

  // d/dlogits of both directions; p_txt is indexed [text, image].
  Mat d_logits = p_img + p_txt.transpose();
  d_logits.diagonal().array() -= 2.0;
  d_logits *= 0.5 / nn;

  r.d_image = (d_logits * text) / temperature;
  r.d_text = (d_logits.transpose() * image) / temperature;
  return r;
}

}  // namespace alphaclip
