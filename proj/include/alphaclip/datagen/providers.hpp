#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "alphaclip/datagen/scene.hpp"
#include "alphaclip/encoder/image.hpp"
#include "alphaclip/encoder/params.hpp"
#include "alphaclip/encoder/text.hpp"

namespace alphaclip {

// Box -> binary mask. Implementations throw ProviderError when they cannot
// produce a mask. reentrant() reports whether concurrent calls are safe.
class MaskProvider {
 public:
  virtual ~MaskProvider() = default;
  virtual BinaryMask mask_for(const RgbaImage& image, const Box& box) const = 0;
  virtual bool reentrant() const { return true; }
};

// The box interior itself.
class BoxFillMaskProvider final : public MaskProvider {
 public:
  BinaryMask mask_for(const RgbaImage& image, const Box& box) const override;
};

// Returns the known region mask whose bounding box best overlaps the query.
class OracleMaskProvider final : public MaskProvider {
 public:
  explicit OracleMaskProvider(std::vector<BinaryMask> masks) : masks_(std::move(masks)) {}
  BinaryMask mask_for(const RgbaImage& image, const Box& box) const override;

 private:
  std::vector<BinaryMask> masks_;
};

class FunctionMaskProvider final : public MaskProvider {
 public:
  using Fn = std::function<BinaryMask(const RgbaImage&, const Box&)>;
  explicit FunctionMaskProvider(Fn fn, bool reentrant = true) : fn_(std::move(fn)), reentrant_(reentrant) {}
  BinaryMask mask_for(const RgbaImage& image, const Box& box) const override { return fn_(image, box); }
  bool reentrant() const override { return reentrant_; }

 private:
  Fn fn_;
  bool reentrant_;
};

// Candidate masks for one labelled image.
class MaskProposer {
 public:
  virtual ~MaskProposer() = default;
  virtual std::vector<BinaryMask> propose(const RgbaImage& image, std::size_t image_index) const = 0;
};

class ListMaskProposer final : public MaskProposer {
 public:
  explicit ListMaskProposer(std::vector<std::vector<BinaryMask>> per_image) : per_image_(std::move(per_image)) {}
  std::vector<BinaryMask> propose(const RgbaImage& image, std::size_t image_index) const override;

 private:
  std::vector<std::vector<BinaryMask>> per_image_;
};

class CaptionProvider {
 public:
  virtual ~CaptionProvider() = default;
  virtual std::string caption(const RgbaImage& composite) const = 0;
};

// "a <colour> object", naming the palette colour nearest the mean of the
// non-white pixels.
class GrammarCaptioner final : public CaptionProvider {
 public:
  explicit GrammarCaptioner(std::vector<NamedColor> palette) : palette_(std::move(palette)) {}
  std::string caption(const RgbaImage& composite) const override;

 private:
  std::vector<NamedColor> palette_;
};

// Image + label -> similarity.
class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual double score(const RgbaImage& image, const std::string& label) const = 0;
  virtual bool reentrant() const { return true; }
};

class FunctionScorer final : public Scorer {
 public:
  using Fn = std::function<double(const RgbaImage&, const std::string&)>;
  explicit FunctionScorer(Fn fn) : fn_(std::move(fn)) {}
  double score(const RgbaImage& image, const std::string& label) const override { return fn_(image, label); }

 private:
  Fn fn_;
};

// Cosine similarity between the encoded RGBA image and the prompted label.
class EncoderScorer final : public Scorer {
 public:
  EncoderScorer(const EncoderParams& params, const Vocabulary& vocab, std::string prompt_template = "a {name}");
  double score(const RgbaImage& image, const std::string& label) const override;
  bool reentrant() const override { return false; }

 private:
  const EncoderParams& params_;
  const Vocabulary& vocab_;
  std::string template_;
  mutable std::map<std::string, Embedding> text_cache_;
};

std::string apply_template(const std::string& templ, const std::string& name);

}  // namespace alphaclip
