#include "alphaclip/datagen/providers.hpp"

#include <algorithm>
#include <limits>

#include "alphaclip/datagen/imageops.hpp"
#include "alphaclip/datagen/mask.hpp"
#include "alphaclip/encoder/vision.hpp"

namespace alphaclip {

BinaryMask BoxFillMaskProvider::mask_for(const RgbaImage& image, const Box& box) const {
  try {
    return box_mask(box, image.height, image.width);
  } catch (const InputError& e) {
    throw ProviderError(e.what());
  }
}

namespace {
double box_iou(const Box& a, const Box& b) {
  const int ix = std::max(0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const int iy = std::max(0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = static_cast<double>(ix) * iy;
  const double uni = static_cast<double>(a.width()) * a.height() + static_cast<double>(b.width()) * b.height() - inter;
  return uni > 0 ? inter / uni : 0.0;
}
}  // namespace

BinaryMask OracleMaskProvider::mask_for(const RgbaImage& image, const Box& box) const {
  double best = 0.0;
  const BinaryMask* pick = nullptr;
  for (const auto& m : masks_) {
    if (m.height != image.height || m.width != image.width) continue;
    const double iou = box_iou(bounding_box(m), box);
    if (iou > best) best = iou, pick = &m;
  }
  if (!pick) throw ProviderError("no known region overlaps the box");
  return *pick;
}

std::vector<BinaryMask> ListMaskProposer::propose(const RgbaImage&, std::size_t image_index) const {
  if (image_index >= per_image_.size()) return {};
  return per_image_[image_index];
}

std::string GrammarCaptioner::caption(const RgbaImage& composite) const {
  Rgb sum{};
  int n = 0;
  for (int y = 0; y < composite.height; ++y)
    for (int x = 0; x < composite.width; ++x) {
      bool white = true;
      for (int c = 0; c < 3; ++c) white = white && composite.at(y, x, c) >= 0.97;
      if (white) continue;
      for (int c = 0; c < 3; ++c) sum[c] += composite.at(y, x, c);
      ++n;
    }
  if (n == 0 || palette_.empty()) return "a white object";
  double best = std::numeric_limits<double>::infinity();
  std::size_t pick = 0;
  for (std::size_t i = 0; i < palette_.size(); ++i) {
    double d = 0.0;
    for (int c = 0; c < 3; ++c) d += (sum[c] / n - palette_[i].rgb[c]) * (sum[c] / n - palette_[i].rgb[c]);
    if (d < best) best = d, pick = i;
  }
  return "a " + palette_[pick].name + " object";
}

std::string apply_template(const std::string& templ, const std::string& name) {
  std::string out = templ;
  const std::string key = "{name}";
  for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + name.size()))
    out.replace(pos, key.size(), name);
  return out;
}

EncoderScorer::EncoderScorer(const EncoderParams& params, const Vocabulary& vocab, std::string prompt_template)
    : params_(params), vocab_(vocab), template_(std::move(prompt_template)) {}

double EncoderScorer::score(const RgbaImage& image, const std::string& label) const {
  auto it = text_cache_.find(label);
  if (it == text_cache_.end()) {
    const auto ids = vocab_.encode(apply_template(template_, label), params_.arch.context_length);
    it = text_cache_.emplace(label, encode_text(ids, params_)).first;
  }
  return encode_image(image, params_).dot(it->second);
}

}  // namespace alphaclip
