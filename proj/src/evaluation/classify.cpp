#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "alphaclip/datagen/mask.hpp"
#include "alphaclip/datagen/providers.hpp"
#include "alphaclip/evaluation/eval.hpp"

namespace alphaclip {

std::vector<double> box_to_alpha(const Box& box, int height, int width) {
  if (box.width() <= 0 || box.height() <= 0) throw InputError("box has zero area");
  if (!box.valid_in(height, width)) throw InputError("box lies outside the image");
  std::vector<double> a(static_cast<std::size_t>(height) * width, 0.0);
  for (int y = box.y0; y < box.y1; ++y)
    for (int x = box.x0; x < box.x1; ++x) a[static_cast<std::size_t>(y) * width + x] = 1.0;
  return a;
}

RgbaImage with_box_alpha(RgbaImage image, const Box& box) {
  image.alpha = box_to_alpha(box, image.height, image.width);
  return image;
}

ClassPromptSet ClassPromptSet::build(const std::vector<std::string>& class_names,
                                     const std::vector<std::string>& templates, const Vocabulary& vocab,
                                     const EncoderParams& params) {
  if (templates.empty()) throw InputError("at least one prompt template required");
  if (class_names.empty()) throw InputError("at least one class required");
  ClassPromptSet s;
  s.class_names = class_names;
  s.embeddings.resize(static_cast<Eigen::Index>(class_names.size()), params.arch.embed_dim);
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    std::vector<std::string> ps;
    Vec sum = Vec::Zero(params.arch.embed_dim);
    for (const auto& t : templates) {
      ps.push_back(apply_template(t, class_names[c]));
      sum += encode_text(vocab.encode(ps.back(), params.arch.context_length), params);
    }
    s.embeddings.row(static_cast<Eigen::Index>(c)) = sum / sum.norm();
    s.prompts.push_back(std::move(ps));
  }
  return s;
}

std::vector<int> rank_classes(const Vec& scores) {
  std::vector<int> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return scores(a) > scores(b); });
  return order;
}

ClassificationMetrics classify_embeddings(const Mat& image_embeddings, std::span<const int> labels,
                                          const Mat& class_embeddings) {
  if (static_cast<std::size_t>(image_embeddings.rows()) != labels.size())
    throw InputError("one label per image required");
  const int classes = static_cast<int>(class_embeddings.rows());
  ClassificationMetrics m;
  m.samples = labels.size();
  m.class_counts.assign(static_cast<std::size_t>(classes), 0);
  m.class_hits.assign(static_cast<std::size_t>(classes), 0);
  std::vector<std::size_t> hits5(static_cast<std::size_t>(classes), 0);
  std::size_t top1 = 0, top5 = 0;
  const Mat scores = image_embeddings * class_embeddings.transpose();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || y >= classes) throw InputError("label " + std::to_string(y) + " has no prompt");
    const auto order = rank_classes(scores.row(static_cast<Eigen::Index>(i)));
    m.predictions.push_back(order[0]);
    const bool hit = order[0] == y;
    const bool hit5 = std::find(order.begin(), order.begin() + std::min(5, classes), y) != order.begin() + std::min(5, classes);
    m.class_counts[static_cast<std::size_t>(y)]++;
    m.class_hits[static_cast<std::size_t>(y)] += hit;
    hits5[static_cast<std::size_t>(y)] += hit5;
    top1 += hit;
    top5 += hit5;
  }
  if (m.samples == 0) return m;
  m.top1 = static_cast<double>(top1) / m.samples;
  m.top5 = static_cast<double>(top5) / m.samples;
  double sum1 = 0.0, sum5 = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    const auto n = m.class_counts[static_cast<std::size_t>(c)];
    if (n == 0) {
      m.excluded_classes.push_back(c);
      continue;
    }
    sum1 += static_cast<double>(m.class_hits[static_cast<std::size_t>(c)]) / n;
    sum5 += static_cast<double>(hits5[static_cast<std::size_t>(c)]) / n;
    ++present;
  }
  m.mean_per_class = sum1 / present;
  m.mean_per_class_top5 = sum5 / present;
  return m;
}

ClassificationMetrics zero_shot_classify(std::span<const RgbaImage> images, std::span<const int> labels,
                                         const ClassPromptSet& prompts, const EncoderParams& params) {
  Mat emb(static_cast<Eigen::Index>(images.size()), params.arch.embed_dim);
  for (std::size_t i = 0; i < images.size(); ++i) emb.row(static_cast<Eigen::Index>(i)) = encode_image(images[i], params);
  return classify_embeddings(emb, labels, prompts.embeddings);
}

RegionEvalSet make_region_eval_set(std::uint64_t seed, int scenes, const SceneSpec& spec) {
  RegionEvalSet set;
  set.class_names = region_class_names(spec);
  for (int i = 0; i < scenes; ++i) {
    Scene s = generate_synthetic_scene(scene_seed(seed, static_cast<std::uint64_t>(i)), spec);
    for (const auto& r : s.regions)
      set.items.push_back({set.scenes.size(), r.mask, r.box, region_class_index(spec, r.color, r.shape), r.caption});
    set.scenes.push_back(std::move(s.image));
    set.whole_captions.push_back(std::move(s.whole_caption));
  }
  return set;
}

const char* alpha_level_name(AlphaLevel l) {
  switch (l) {
    case AlphaLevel::Whole: return "whole";
    case AlphaLevel::Box: return "box";
    case AlphaLevel::Mask: return "mask";
  }
  return "?";
}

RgbaImage region_input(const RegionEvalSet& set, const RegionItem& item, AlphaLevel level) {
  const RgbaImage& img = set.scenes.at(item.scene);
  switch (level) {
    case AlphaLevel::Whole: return with_full_alpha(img);
    case AlphaLevel::Box: return with_box_alpha(img, item.box);
    case AlphaLevel::Mask: return with_alpha(img, item.mask);
  }
  return img;
}

AlphaSweep alpha_level_sweep(const RegionEvalSet& set, const ClassPromptSet& prompts, const EncoderParams& params) {
  std::vector<int> labels;
  for (const auto& it : set.items) labels.push_back(it.label);
  auto run = [&](AlphaLevel level) {
    std::vector<RgbaImage> imgs;
    imgs.reserve(set.items.size());
    for (const auto& it : set.items) imgs.push_back(region_input(set, it, level));
    return zero_shot_classify(imgs, labels, prompts, params);
  };
  return {run(AlphaLevel::Whole), run(AlphaLevel::Box), run(AlphaLevel::Mask)};
}

ClassificationMetrics whole_image_retrieval(const RegionEvalSet& set, const Vocabulary& vocab,
                                            const EncoderParams& params) {
  std::map<std::string, int> index;
  std::vector<std::string> unique;
  std::vector<int> labels;
  for (const auto& c : set.whole_captions) {
    auto [it, fresh] = index.emplace(c, static_cast<int>(unique.size()));
    if (fresh) unique.push_back(c);
    labels.push_back(it->second);
  }
  Mat text(static_cast<Eigen::Index>(unique.size()), params.arch.embed_dim);
  for (std::size_t i = 0; i < unique.size(); ++i)
    text.row(static_cast<Eigen::Index>(i)) = encode_text(vocab.encode(unique[i], params.arch.context_length), params);
  Mat img(static_cast<Eigen::Index>(set.scenes.size()), params.arch.embed_dim);
  for (std::size_t i = 0; i < set.scenes.size(); ++i)
    img.row(static_cast<Eigen::Index>(i)) = encode_image(with_full_alpha(set.scenes[i]), params);
  return classify_embeddings(img, labels, text);
}

}  // namespace alphaclip
