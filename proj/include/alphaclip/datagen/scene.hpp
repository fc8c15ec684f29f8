#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "alphaclip/encoder/image.hpp"
#include "alphaclip/kv.hpp"

namespace alphaclip {

enum class ShapeType { Circle, Square, Triangle };
enum class OverlapPolicy { Allow, Forbid };

const char* shape_name(ShapeType s);
ShapeType parse_shape(const std::string& name);

struct NamedColor {
  std::string name;
  std::array<double, 3> rgb{};
  bool operator==(const NamedColor&) const = default;
};

std::vector<NamedColor> default_palette();

// Procedural scene family: colored shapes over a noisy tinted background.
struct SceneSpec {
  int canvas = 32;
  int min_shapes = 1;
  int max_shapes = 4;
  std::vector<ShapeType> shapes{ShapeType::Circle, ShapeType::Square, ShapeType::Triangle};
  std::vector<NamedColor> palette = default_palette();
  OverlapPolicy overlap = OverlapPolicy::Allow;
  double min_radius = 5.0;
  double max_radius = 8.0;
  // Allow policy: each shape keeps at least this fraction of its footprint visible.
  double min_visible = 0.6;
  double background_noise = 0.04;
  double color_jitter = 0.06;
  int max_retries = 200;
  // {color} and {shape} are substituted.
  std::string region_template = "a {color} {shape}";

  void validate() const;
  std::string to_text() const;  // [scene]-section body
  static SceneSpec from_text(const std::string& text);
  void set(const kv::Entry& e);
  bool operator==(const SceneSpec&) const = default;
};

struct SceneRegion {
  BinaryMask mask;  // visible pixels
  Box box;          // tight box of the visible pixels
  std::string caption;
  int color = 0;  // palette index
  ShapeType shape = ShapeType::Circle;
  double cx = 0, cy = 0, radius = 0;
};

struct Scene {
  RgbaImage image;  // alpha is all ones
  std::vector<SceneRegion> regions;
  std::string whole_caption;
};

BinaryMask rasterize_shape(ShapeType shape, double cx, double cy, double radius, int height, int width);

// Deterministic in (seed, spec). Throws GenerationError when placement fails
// within the retry budget.
Scene generate_synthetic_scene(std::uint64_t seed, const SceneSpec& spec);

// Per-index seed so scene i never depends on how many scenes precede it.
std::uint64_t scene_seed(std::uint64_t base_seed, std::uint64_t index);

std::string region_caption(const SceneSpec& spec, int color, ShapeType shape);
// "a red circle, blue square and green triangle" in palette order.
std::string whole_caption(const SceneSpec& spec, const std::vector<SceneRegion>& regions);

// Every class name ("red circle", ...) in palette-major order.
std::vector<std::string> region_class_names(const SceneSpec& spec);
int region_class_index(const SceneSpec& spec, int color, ShapeType shape);

// Closed word list covering captions, prompts, and pipeline captions.
std::vector<std::string> corpus_words(const SceneSpec& spec);

// Rounds to the nearest multiple of 1/255 so shards can store bytes losslessly.
double quantize8(double v);

}  // namespace alphaclip
