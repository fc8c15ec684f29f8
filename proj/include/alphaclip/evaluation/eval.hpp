#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alphaclip/datagen/imageops.hpp"
#include "alphaclip/datagen/scene.hpp"
#include "alphaclip/encoder/params.hpp"
#include "alphaclip/encoder/text.hpp"
#include "alphaclip/encoder/vision.hpp"
#include "alphaclip/kv.hpp"

namespace alphaclip {

// 1 inside the half-open box, 0 outside. Zero-area or out-of-image boxes
// throw InputError.
std::vector<double> box_to_alpha(const Box& box, int height, int width);
RgbaImage with_box_alpha(RgbaImage image, const Box& box);

struct ClassPromptSet {
  std::vector<std::string> class_names;
  std::vector<std::vector<std::string>> prompts;  // per class, one per template
  Mat embeddings;                                 // C x E, unit rows

  // Templates contain "{name}". A class embedding is the normalised mean of
  // its template embeddings.
  static ClassPromptSet build(const std::vector<std::string>& class_names,
                              const std::vector<std::string>& templates, const Vocabulary& vocab,
                              const EncoderParams& params);
};

struct ClassificationMetrics {
  double top1 = 0.0;            // micro accuracy
  double top5 = 0.0;
  double mean_per_class = 0.0;  // unweighted mean of per-class top-1 rates
  double mean_per_class_top5 = 0.0;
  std::size_t samples = 0;
  std::vector<std::size_t> class_counts;
  std::vector<std::size_t> class_hits;
  std::vector<int> predictions;
  std::vector<int> excluded_classes;  // no samples; left out of the means
};

// Class scores by cosine similarity; ties rank the lower class index first.
// Any k-th ranked class uses the same ordering.
std::vector<int> rank_classes(const Vec& scores);
ClassificationMetrics classify_embeddings(const Mat& image_embeddings, std::span<const int> labels,
                                          const Mat& class_embeddings);
ClassificationMetrics zero_shot_classify(std::span<const RgbaImage> images, std::span<const int> labels,
                                         const ClassPromptSet& prompts, const EncoderParams& params);

// Ground-truth regions of generated scenes, one item per region.
struct RegionItem {
  std::size_t scene = 0;
  BinaryMask mask;
  Box box;
  int label = 0;
  std::string caption;
};

struct RegionEvalSet {
  std::vector<RgbaImage> scenes;  // alpha == 1
  std::vector<std::string> whole_captions;
  std::vector<RegionItem> items;
  std::vector<std::string> class_names;
};

RegionEvalSet make_region_eval_set(std::uint64_t seed, int scenes, const SceneSpec& spec);

enum class AlphaLevel { Whole, Box, Mask };
const char* alpha_level_name(AlphaLevel l);
RgbaImage region_input(const RegionEvalSet& set, const RegionItem& item, AlphaLevel level);

struct AlphaSweep {
  ClassificationMetrics whole;
  ClassificationMetrics box;
  ClassificationMetrics mask;
};
AlphaSweep alpha_level_sweep(const RegionEvalSet& set, const ClassPromptSet& prompts, const EncoderParams& params);

// Top-1 retrieval of each scene's own caption among the set's distinct whole
// captions (alpha == 1).
ClassificationMetrics whole_image_retrieval(const RegionEvalSet& set, const Vocabulary& vocab,
                                            const EncoderParams& params);

struct Proposal {
  Box box;
  std::optional<BinaryMask> mask;
};

struct PreprocessSpec {
  bool original = true;
  bool blur = true;
  bool crop = false;
  bool grayscale = false;
  // Blur standard deviation at reference_width; scaled to the input width.
  double sigma = 100.0;
  double reference_width = 640.0;

  double effective_sigma(int width) const { return sigma * width / reference_width; }
  int enabled() const { return int(original) + int(blur) + int(crop) + int(grayscale); }
  void validate() const;
  std::string to_text() const;
  void set(const kv::Entry& e);
  bool operator==(const PreprocessSpec&) const = default;
};

enum class PreprocessVariant { Original, Blur, Crop, Grayscale };
// Proposal alpha is its mask, or the box when no mask is present.
std::vector<double> proposal_alpha(const Proposal& p, int height, int width);
RgbaImage preprocess(const RgbaImage& image, const Proposal& proposal, PreprocessVariant variant,
                     const PreprocessSpec& spec);

struct RecResult {
  std::size_t index = 0;
  std::vector<double> scores;  // mean over enabled variants, per proposal
};
RecResult rec_select(const RgbaImage& image, std::span<const Proposal> proposals, const TokenIds& expression,
                     const PreprocessSpec& spec, const EncoderParams& params);
RecResult rec_select(const RgbaImage& image, std::span<const Proposal> proposals, const Embedding& expression,
                     const PreprocessSpec& spec, const EncoderParams& params);

// Crop-only reference: square zero-padded crop of each box with alpha == 1.
RecResult rec_crop_baseline(const RgbaImage& image, std::span<const Proposal> proposals,
                            const Embedding& expression, const EncoderParams& params);

struct RecEvalResult {
  double alpha_accuracy = 0.0;
  double crop_accuracy = 0.0;
  std::size_t queries = 0;
};
// One query per region whose caption is unique in its scene; proposals are
// the scene's oracle regions.
RecEvalResult evaluate_rec(const RegionEvalSet& set, const Vocabulary& vocab, const PreprocessSpec& spec,
                           const EncoderParams& alpha_params, const EncoderParams& crop_params);

// Background pixels take the fill colour; alpha is forced to 1.
RgbaImage image_level_mask_baseline(const RgbaImage& image, const BinaryMask& mask, const Rgb& fill);

struct RedCircleStyle {
  double stroke = 1.0;
  Rgb color{1.0, 0.0, 0.0};
  double enlarge = 1.1;
};
// Pixel centres with |d - 1| * sqrt(a b) <= stroke / 2, where d is the
// normalised elliptical radius about the box centre and a, b are the
// enlarged semi-axes.
BinaryMask red_circle_annulus(const Box& box, int height, int width, const RedCircleStyle& style);
RgbaImage red_circle_baseline(const RgbaImage& image, const Box& box, const RedCircleStyle& style);

struct BaselineRow {
  std::string method;
  ClassificationMetrics metrics;
};

struct BaselineOptions {
  std::optional<Rgb> fill;  // default: dataset mean colour
  RedCircleStyle red_circle;
};

// Rows: Original CLIP, MaskAdaptedCLIP, Red Circle, MaskCLIP*, Feature masking,
// Alpha-CLIP. The first five use original; the last uses alpha_tuned with
// ground-truth mask alpha.
std::vector<BaselineRow> compare_baselines(const RegionEvalSet& set, const ClassPromptSet& original_prompts,
                                           const EncoderParams& original, const ClassPromptSet& alpha_prompts,
                                           const EncoderParams& alpha_tuned, const BaselineOptions& options = {});

Rgb dataset_mean_color(const RegionEvalSet& set);

}  // namespace alphaclip
