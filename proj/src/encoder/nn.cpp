#include "alphaclip/encoder/nn.hpp"

#include <cmath>

namespace alphaclip::nn {

namespace {
constexpr double kLayerNormEps = 1e-5;

const Mat* bias_for(AttentionBias bias, std::size_t seq, std::size_t nseq) {
  if (bias.empty()) return nullptr;
  if (bias.size() == 1) return &bias[0];
  if (bias.size() != nseq) throw ShapeError("attention bias count does not match sequence count");
  return &bias[seq];
}
}  // namespace

Mat layer_norm(const Mat& x, const LayerNormParams& p, LayerNormCache* cache) {
  const auto n = x.rows();
  const auto d = static_cast<double>(x.cols());
  Mat xhat(n, x.cols());
  Eigen::VectorXd rstd(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mu = x.row(i).sum() / d;
    const auto centered = x.row(i).array() - mu;
    const double var = centered.square().sum() / d;
    rstd(i) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(i) = centered * rstd(i);
  }
  Mat y = (xhat.array().rowwise() * p.gain.row(0).array()).rowwise() + p.bias.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

Mat layer_norm_backward(const Mat& dy, const LayerNormParams& p, const LayerNormCache& c,
                        LayerNormParams* grad) {
  if (grad) {
    grad->gain += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    grad->bias += dy.colwise().sum();
  }
  const auto d = static_cast<double>(dy.cols());
  Mat dxhat = dy.array().rowwise() * p.gain.row(0).array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / d;
    const double mean_dx = dxhat.row(i).dot(c.xhat.row(i)) / d;
    dx.row(i) = c.rstd(i) * (dxhat.row(i).array() - mean_d - c.xhat.row(i).array() * mean_dx);
  }
  return dx;
}

double gelu(double x) { return x / (1.0 + std::exp(-kGeluSlope * x)); }

double gelu_grad(double x) {
  const double s = 1.0 / (1.0 + std::exp(-kGeluSlope * x));
  return s + kGeluSlope * x * s * (1.0 - s);
}

Mat gelu(const Mat& x) {
  return (x.array() / (1.0 + (-kGeluSlope * x.array()).exp())).matrix();
}

Mat gelu_grad(const Mat& x) {
  const auto s = (1.0 + (-kGeluSlope * x.array()).exp()).inverse();
  return (s + kGeluSlope * x.array() * s * (1.0 - s)).matrix();
}

namespace {
constexpr double kExpUnderflow = -745.2;
}  // namespace

void softmax_rows(Mat& s) {
  // Separate passes keep each expression vectorizable.
  const Eigen::VectorXd mx = s.rowwise().maxCoeff();
  s.array().colwise() -= mx.array();
  // Eigen's packet exp clamps its argument, so -1e9 would come out as a
  // denormal instead of 0. Below about -745 the true value underflows anyway.
  s.array() = (s.array() < kExpUnderflow).select(0.0, s.array().exp());
  const Eigen::VectorXd z = s.rowwise().sum();
  s.array().colwise() /= z.array();
}

namespace {

void attention_core(const Mat& qkv, int seq_len, int heads, AttentionBias bias, Mat& ctx,
                    std::vector<Mat>* probs_out) {
  const int d = static_cast<int>(qkv.cols() / 3);
  const int dh = d / heads;
  const auto nseq = static_cast<std::size_t>(qkv.rows() / seq_len);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  if (probs_out) probs_out->resize(nseq * heads);
  for (std::size_t s = 0; s < nseq; ++s) {
    const Mat* b = bias_for(bias, s, nseq);
    const auto r0 = static_cast<Eigen::Index>(s) * seq_len;
    for (int h = 0; h < heads; ++h) {
      const auto q = qkv.block(r0, h * dh, seq_len, dh);
      const auto k = qkv.block(r0, d + h * dh, seq_len, dh);
      const auto v = qkv.block(r0, 2 * d + h * dh, seq_len, dh);
      Mat p = (q * k.transpose()) * scale;
      if (b) p += *b;
      softmax_rows(p);
      ctx.block(r0, h * dh, seq_len, dh).noalias() = p * v;
      if (probs_out) (*probs_out)[s * heads + h] = std::move(p);
    }
  }
}

Mat project_qkv(const Mat& h1, const BlockParams& p) {
  Mat qkv = h1 * p.w_qkv;
  qkv.rowwise() += p.b_qkv.row(0);
  return qkv;
}

}  // namespace

Mat block_forward(const Mat& x, int seq_len, int heads, const BlockParams& p, AttentionBias bias,
                  BlockCache* cache) {
  if (x.rows() % seq_len != 0) throw ShapeError("token rows are not a multiple of sequence length");
  BlockCache local;
  BlockCache& c = cache ? *cache : local;

  c.h1 = layer_norm(x, p.ln1, &c.ln1);
  c.qkv = project_qkv(c.h1, p);
  c.ctx.resize(x.rows(), x.cols());
  attention_core(c.qkv, seq_len, heads, bias, c.ctx, cache ? &c.probs : nullptr);

  c.x_mid = x + c.ctx * p.w_out;
  c.x_mid.rowwise() += p.b_out.row(0);

  c.h2 = layer_norm(c.x_mid, p.ln2, &c.ln2);
  c.fc_pre = c.h2 * p.w_fc;
  c.fc_pre.rowwise() += p.b_fc.row(0);
  c.fc_act = gelu(c.fc_pre);

  Mat out = c.x_mid + c.fc_act * p.w_proj;
  out.rowwise() += p.b_proj.row(0);
  return out;
}

Mat block_backward(const Mat& dy, int seq_len, int heads, const BlockParams& p, const BlockCache& c,
                   BlockParams* grad) {
  const int d = static_cast<int>(dy.cols());
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto nseq = static_cast<std::size_t>(dy.rows() / seq_len);

  // MLP branch.
  Mat d_fc = dy * p.w_proj.transpose();
  if (grad) {
    grad->w_proj.noalias() += c.fc_act.transpose() * dy;
    grad->b_proj += dy.colwise().sum();
  }
  d_fc.array() *= gelu_grad(c.fc_pre).array();
  if (grad) {
    grad->w_fc.noalias() += c.h2.transpose() * d_fc;
    grad->b_fc += d_fc.colwise().sum();
  }
  Mat d_h2 = d_fc * p.w_fc.transpose();
  Mat d_mid = dy + layer_norm_backward(d_h2, p.ln2, c.ln2, grad ? &grad->ln2 : nullptr);

  // Attention branch.
  Mat d_ctx = d_mid * p.w_out.transpose();
  if (grad) {
    grad->w_out.noalias() += c.ctx.transpose() * d_mid;
    grad->b_out += d_mid.colwise().sum();
  }
  Mat d_qkv(dy.rows(), 3 * d);
  for (std::size_t s = 0; s < nseq; ++s) {
    const auto r0 = static_cast<Eigen::Index>(s) * seq_len;
    for (int h = 0; h < heads; ++h) {
      const Mat& prob = c.probs[s * heads + h];
      const auto q = c.qkv.block(r0, h * dh, seq_len, dh);
      const auto k = c.qkv.block(r0, d + h * dh, seq_len, dh);
      const auto v = c.qkv.block(r0, 2 * d + h * dh, seq_len, dh);
      const auto d_o = d_ctx.block(r0, h * dh, seq_len, dh);
      Mat d_p = d_o * v.transpose();
      d_qkv.block(r0, 2 * d + h * dh, seq_len, dh).noalias() = prob.transpose() * d_o;
      const Eigen::VectorXd row_dot = (d_p.array() * prob.array()).rowwise().sum();
      Mat d_s = prob.array() * (d_p.array().colwise() - row_dot.array());
      d_qkv.block(r0, h * dh, seq_len, dh).noalias() = (d_s * k) * scale;
      d_qkv.block(r0, d + h * dh, seq_len, dh).noalias() = (d_s.transpose() * q) * scale;
    }
  }
  if (grad) {
    grad->w_qkv.noalias() += c.h1.transpose() * d_qkv;
    grad->b_qkv += d_qkv.colwise().sum();
  }
  Mat d_h1 = d_qkv * p.w_qkv.transpose();
  return d_mid + layer_norm_backward(d_h1, p.ln1, c.ln1, grad ? &grad->ln1 : nullptr);
}

std::vector<Mat> attention_probs(const Mat& x, int seq_len, int heads, const BlockParams& p,
                                 AttentionBias bias) {
  const Mat h1 = layer_norm(x, p.ln1, nullptr);
  const Mat qkv = project_qkv(h1, p);
  Mat ctx(x.rows(), x.cols());
  std::vector<Mat> probs;
  attention_core(qkv, seq_len, heads, bias, ctx, &probs);
  return probs;
}

Mat normalize_rows(const Mat& z, Eigen::VectorXd* norms) {
  Eigen::VectorXd n = z.rowwise().norm();
  Mat e = z;
  for (Eigen::Index i = 0; i < z.rows(); ++i) e.row(i) /= n(i);
  if (norms) *norms = std::move(n);
  return e;
}

Mat normalize_rows_backward(const Mat& de, const Mat& e, const Eigen::VectorXd& norms) {
  Mat dz(de.rows(), de.cols());
  for (Eigen::Index i = 0; i < de.rows(); ++i) {
    const double proj = e.row(i).dot(de.row(i));
    dz.row(i) = (de.row(i) - proj * e.row(i)) / norms(i);
  }
  return dz;
}

}  // namespace alphaclip::nn
