#include <algorithm>
#include <cmath>
#include <sstream>

#include "alphaclip/datagen/mask.hpp"
#include "alphaclip/evaluation/eval.hpp"

namespace alphaclip {

void PreprocessSpec::validate() const {
  if (enabled() == 0) throw ConfigError("preprocess: at least one variant must be enabled");
  if (!(sigma > 0.0)) throw ConfigError("preprocess.sigma: must be positive");
  if (!(reference_width > 0.0)) throw ConfigError("preprocess.reference_width: must be positive");
}

std::string PreprocessSpec::to_text() const {
  std::ostringstream os;
  os.precision(17);
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "original = " << b(original) << "\n"
     << "blur = " << b(blur) << "\n"
     << "crop = " << b(crop) << "\n"
     << "grayscale = " << b(grayscale) << "\n"
     << "sigma = " << sigma << "\n"
     << "reference_width = " << reference_width << "\n";
  return os.str();
}

void PreprocessSpec::set(const kv::Entry& e) {
  const auto& k = e.key;
  if (k == "original") original = kv::to_bool(e);
  else if (k == "blur") blur = kv::to_bool(e);
  else if (k == "crop") crop = kv::to_bool(e);
  else if (k == "grayscale") grayscale = kv::to_bool(e);
  else if (k == "sigma") sigma = kv::to_double(e);
  else if (k == "reference_width") reference_width = kv::to_double(e);
  else throw ConfigError("preprocess." + k + ": unknown key");
}

std::vector<double> proposal_alpha(const Proposal& p, int height, int width) {
  if (!p.mask) return box_to_alpha(p.box, height, width);
  if (p.mask->height != height || p.mask->width != width) throw ShapeError("proposal mask does not match image");
  std::vector<double> a(p.mask->bits.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = p.mask->bits[i] ? 1.0 : 0.0;
  return a;
}

namespace {

// Square box around b, centred, possibly extending past the image.
struct SquareView {
  int x0, y0, side;
};
SquareView square_around(const Box& b) {
  const int side = std::max(b.width(), b.height());
  return {b.x0 - (side - b.width()) / 2, b.y0 - (side - b.height()) / 2, side};
}

RgbaImage square_crop_zero_fill(const RgbaImage& image, const Box& box, bool keep_alpha, int out_size) {
  const SquareView v = square_around(box);
  RgbaImage sq(v.side, v.side, 0.0, 0.0);
  for (int y = 0; y < v.side; ++y)
    for (int x = 0; x < v.side; ++x) {
      const int sy = v.y0 + y, sx = v.x0 + x;
      if (sy < box.y0 || sy >= box.y1 || sx < box.x0 || sx >= box.x1) continue;
      for (int c = 0; c < 3; ++c) sq.at(y, x, c) = image.at(sy, sx, c);
      sq.a(y, x) = keep_alpha ? image.a(sy, sx) : 1.0;
    }
  RgbaImage out = resize(sq, out_size, out_size);
  if (!keep_alpha) std::fill(out.alpha.begin(), out.alpha.end(), 1.0);
  return out;
}

}  // namespace

RgbaImage preprocess(const RgbaImage& image, const Proposal& proposal, PreprocessVariant variant,
                     const PreprocessSpec& spec) {
  RgbaImage base = image;
  base.alpha = proposal_alpha(proposal, image.height, image.width);
  switch (variant) {
    case PreprocessVariant::Original: return base;
    case PreprocessVariant::Blur: {
      const RgbaImage blurred = gaussian_blur(base, spec.effective_sigma(image.width));
      RgbaImage out = base;
      for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
          if (base.a(y, x) == 0.0)
            for (int c = 0; c < 3; ++c) out.at(y, x, c) = blurred.at(y, x, c);
      return out;
    }
    case PreprocessVariant::Crop: return square_crop_zero_fill(base, proposal.box, true, image.height);
    case PreprocessVariant::Grayscale: return grayscale(base);
  }
  return base;
}

namespace {
std::size_t argmax_lowest(const std::vector<double>& s) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] > s[best]) best = i;
  return best;
}
}  // namespace

RecResult rec_select(const RgbaImage& image, std::span<const Proposal> proposals, const TokenIds& expression,
                     const PreprocessSpec& spec, const EncoderParams& params) {
  return rec_select(image, proposals, encode_text(expression, params), spec, params);
}

RecResult rec_select(const RgbaImage& image, std::span<const Proposal> proposals, const Embedding& expression,
                     const PreprocessSpec& spec, const EncoderParams& params) {
  if (proposals.empty()) throw InputError("rec_select needs at least one proposal");
  spec.validate();
  validate(image);
  std::vector<PreprocessVariant> variants;
  if (spec.original) variants.push_back(PreprocessVariant::Original);
  if (spec.blur) variants.push_back(PreprocessVariant::Blur);
  if (spec.crop) variants.push_back(PreprocessVariant::Crop);
  if (spec.grayscale) variants.push_back(PreprocessVariant::Grayscale);
  RecResult r;
  for (const auto& p : proposals) {
    double s = 0.0;
    for (auto v : variants) s += encode_image(preprocess(image, p, v, spec), params).dot(expression);
    r.scores.push_back(s / static_cast<double>(variants.size()));
  }
  r.index = argmax_lowest(r.scores);
  return r;
}

RecResult rec_crop_baseline(const RgbaImage& image, std::span<const Proposal> proposals,
                            const Embedding& expression, const EncoderParams& params) {
  if (proposals.empty()) throw InputError("rec_crop_baseline needs at least one proposal");
  RecResult r;
  for (const auto& p : proposals) {
    if (!p.box.valid_in(image.height, image.width)) throw InputError("proposal box outside image");
    r.scores.push_back(encode_image(square_crop_zero_fill(image, p.box, false, image.height), params).dot(expression));
  }
  r.index = argmax_lowest(r.scores);
  return r;
}

RecEvalResult evaluate_rec(const RegionEvalSet& set, const Vocabulary& vocab, const PreprocessSpec& spec,
                           const EncoderParams& alpha_params, const EncoderParams& crop_params) {
  RecEvalResult out;
  std::size_t alpha_hits = 0, crop_hits = 0;
  for (std::size_t s = 0; s < set.scenes.size(); ++s) {
    std::vector<Proposal> props;
    std::vector<const RegionItem*> items;
    for (const auto& it : set.items)
      if (it.scene == s) {
        props.push_back({it.box, it.mask});
        items.push_back(&it);
      }
    if (props.size() < 2) continue;
    for (std::size_t q = 0; q < items.size(); ++q) {
      const auto unique = std::count_if(items.begin(), items.end(), [&](auto* o) { return o->caption == items[q]->caption; });
      if (unique != 1) continue;
      const TokenIds ids = vocab.encode(items[q]->caption, alpha_params.arch.context_length);
      alpha_hits += rec_select(set.scenes[s], props, encode_text(ids, alpha_params), spec, alpha_params).index == q;
      crop_hits += rec_crop_baseline(set.scenes[s], props, encode_text(ids, crop_params), crop_params).index == q;
      ++out.queries;
    }
  }
  if (out.queries) {
    out.alpha_accuracy = static_cast<double>(alpha_hits) / out.queries;
    out.crop_accuracy = static_cast<double>(crop_hits) / out.queries;
  }
  return out;
}

}  // namespace alphaclip
