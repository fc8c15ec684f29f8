#include "alphaclip/datagen/pipelines.hpp"

#include <algorithm>
#include <map>

#include "alphaclip/datagen/imageops.hpp"
#include "alphaclip/datagen/mask.hpp"

namespace alphaclip {

PipelineResult grounding_pipeline(const RgbaImage& image, std::span<const BoxAnnotation> annotations,
                                  const MaskProvider& provider, const Vocabulary& vocab, int context_length,
                                  const GroundingOptions& options) {
  validate(image);
  PipelineResult out;
  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const auto& ann = annotations[i];
    if (!ann.box.valid_in(image.height, image.width))
      throw InputError("annotation " + std::to_string(i) + " has an invalid box");
    const TokenIds tokens = vocab.encode(ann.text, context_length);
    try {
      const BinaryMask m = provider.mask_for(image, ann.box);
      if (m.height != image.height || m.width != image.width || m.bits.size() != image.alpha.size())
        throw ProviderError("mask size does not match the image");
      const BinaryMask allowed = dilate(box_mask(ann.box, image.height, image.width), options.containment_margin);
      if (!contained_in(m, allowed)) throw ProviderError("mask leaves the dilated box");
      RgbaSample s;
      s.image = with_alpha(image, m);
      s.text = ann.text;
      s.tokens = tokens;
      s.source = SampleSource::Grounding;
      s.region_id = options.id_prefix + "box" + std::to_string(i);
      try {
        check_source_invariant(s);
      } catch (const InputError& e) {
        throw ProviderError(e.what());
      }
      out.samples.push_back(std::move(s));
    } catch (const ProviderError& e) {
      out.skipped.push_back({i, e.what()});
    }
  }
  return out;
}

CandidateView candidate_view(const RgbaImage& image, const BinaryMask& mask, const ClassificationOptions& options) {
  const Box tight = bounding_box(mask);
  if (!tight.valid_in(image.height, image.width)) throw InputError("mask has empty foreground");
  const Box view = enlarge_box(tight, options.enlarge, image.height, image.width);
  const RgbaImage masked = with_alpha(image, mask);
  const int side = options.output_size > 0 ? options.output_size : image.height;
  CandidateView v;
  v.rgba = resize(pad_to_square(crop(masked, view), options.background, 0.0), side, side);
  v.composite = composite_on(v.rgba, mask_from_alpha(v.rgba), options.background);
  return v;
}

PipelineResult classification_pipeline(std::span<const LabeledImage> images, const MaskProposer& proposer,
                                       const Scorer& scorer, const CaptionProvider& captioner,
                                       const Vocabulary& vocab, int context_length,
                                       const ClassificationOptions& options) {
  if (options.top_k < 1) throw InputError("top_k must be >= 1");
  if (options.enlarge < 1.0) throw InputError("enlarge factor must be >= 1");

  struct Candidate {
    std::size_t index;
    std::size_t image;
    std::size_t local;
    double score;
    CandidateView view;
  };
  PipelineResult out;
  std::map<std::string, std::vector<Candidate>> by_label;
  std::size_t next = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    validate(images[i].image);
    const auto masks = proposer.propose(images[i].image, i);
    for (std::size_t j = 0; j < masks.size(); ++j, ++next) {
      const auto& m = masks[j];
      if (m.height != images[i].image.height || m.width != images[i].image.width) {
        out.skipped.push_back({next, "candidate mask size does not match the image"});
        continue;
      }
      if (m.count() == 0) {
        out.skipped.push_back({next, "candidate mask has empty foreground"});
        continue;
      }
      CandidateView view = candidate_view(images[i].image, m, options);
      const double score = scorer.score(view.rgba, images[i].label);
      by_label[images[i].label].push_back({next, i, j, score, std::move(view)});
    }
  }

  for (auto& [label, cands] : by_label) {
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      return a.score != b.score ? a.score > b.score : a.index < b.index;
    });
    const std::size_t keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(options.top_k));
    for (std::size_t r = 0; r < keep; ++r) {
      auto& c = cands[r];
      RgbaSample s;
      s.image = c.view.rgba;
      s.text = label + ", " + captioner.caption(c.view.composite);
      s.source = SampleSource::Classification;
      s.region_id = options.id_prefix + "img" + std::to_string(c.image) + "/cand" + std::to_string(c.local);
      try {
        check_source_invariant(s);
      } catch (const InputError& e) {
        out.skipped.push_back({c.index, e.what()});
        continue;
      }
      s.tokens = vocab.encode(s.text, context_length);
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

SyntheticCorpus build_synthetic_corpus(std::uint64_t seed, int scenes, const SceneSpec& spec,
                                       const Vocabulary& vocab, int context_length, std::uint64_t first_index) {
  if (scenes < 0) throw InputError("scene count must be >= 0");
  SyntheticCorpus corpus;
  for (int k = 0; k < scenes; ++k) {
    const std::uint64_t idx = first_index + static_cast<std::uint64_t>(k);
    const Scene scene = generate_synthetic_scene(scene_seed(seed, idx), spec);
    std::vector<BoxAnnotation> anns;
    std::vector<BinaryMask> masks;
    for (const auto& r : scene.regions) {
      anns.push_back({r.box, r.caption});
      masks.push_back(r.mask);
    }
    GroundingOptions opts;
    opts.id_prefix = "scene" + std::to_string(idx) + "/";
    auto res = grounding_pipeline(scene.image, anns, OracleMaskProvider(std::move(masks)), vocab, context_length, opts);
    for (auto& s : res.samples) corpus.region.push_back(std::move(s));
    for (auto& sk : res.skipped) corpus.skipped.push_back({static_cast<std::size_t>(idx), sk.reason});
    corpus.whole.push_back(
        make_whole_image_sample(scene.image, scene.whole_caption, vocab, context_length, "scene" + std::to_string(idx)));
  }
  return corpus;
}

}  // namespace alphaclip
