#pragma once

#include <span>
#include <string>
#include <vector>

#include "alphaclip/datagen/imageops.hpp"
#include "alphaclip/datagen/providers.hpp"
#include "alphaclip/datagen/sample.hpp"
#include "alphaclip/datagen/scene.hpp"

namespace alphaclip {

struct BoxAnnotation {
  Box box;
  std::string text;
};

struct SkipRecord {
  std::size_t index = 0;  // annotation or candidate index
  std::string reason;
};

struct PipelineResult {
  std::vector<RgbaSample> samples;
  std::vector<SkipRecord> skipped;
};

struct GroundingOptions {
  // Mask pixels may lie at most this far outside the annotated box.
  int containment_margin = 2;
  std::string id_prefix;
};

// One sample per annotation whose provider mask passes the containment check.
// Invalid boxes or untokenizable text throw InputError; provider failures
// are recorded as skips.
PipelineResult grounding_pipeline(const RgbaImage& image, std::span<const BoxAnnotation> annotations,
                                  const MaskProvider& provider, const Vocabulary& vocab, int context_length,
                                  const GroundingOptions& options = {});

struct LabeledImage {
  RgbaImage image;
  std::string label;
};

struct ClassificationOptions {
  int top_k = 1;         // kept candidates per class
  double enlarge = 1.5;  // crop box scale about its centre
  int output_size = 0;   // square side of emitted samples; 0 keeps the source height
  Rgb background{1.0, 1.0, 1.0};
  std::string id_prefix;
};

// Crop, enlarge, centre on a white square, score against the label, keep the
// per-class top-k (ties to the lowest candidate index) and caption each kept
// composite. Output is ordered by label, then rank.
PipelineResult classification_pipeline(std::span<const LabeledImage> images, const MaskProposer& proposer,
                                       const Scorer& scorer, const CaptionProvider& captioner,
                                       const Vocabulary& vocab, int context_length,
                                       const ClassificationOptions& options = {});

// The centred square view of one candidate: original pixels with the mask as
// alpha, and the foreground-on-white composite used for captioning.
struct CandidateView {
  RgbaImage rgba;
  RgbaImage composite;
};
CandidateView candidate_view(const RgbaImage& image, const BinaryMask& mask, const ClassificationOptions& options);

// Procedural corpus: every scene region routed through the grounding
// pipeline with oracle masks, plus one whole-image sample per scene.
struct SyntheticCorpus {
  std::vector<RgbaSample> region;
  std::vector<RgbaSample> whole;
  std::vector<SkipRecord> skipped;
};
SyntheticCorpus build_synthetic_corpus(std::uint64_t seed, int scenes, const SceneSpec& spec,
                                       const Vocabulary& vocab, int context_length, std::uint64_t first_index = 0);

}  // namespace alphaclip
