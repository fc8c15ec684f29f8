#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "alphaclip/encoder/vision.hpp"
#include "alphaclip/evaluation/eval.hpp"

namespace alphaclip {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::string render() const;  // left-aligned first column, right-aligned rest
};

// Machine-readable key = value record with provenance plus an optional table.
struct EvalReport {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string checkpoint;
  std::vector<std::pair<std::string, std::string>> fields;
  Table table;

  void add(const std::string& key, double value);
  void add(const std::string& key, const std::string& value);
  // Accuracies must lie in [0, 1]; throws NumericError otherwise.
  void add_metrics(const std::string& prefix, const ClassificationMetrics& m);
  std::string to_text() const;
};

Table baseline_table(const std::vector<BaselineRow>& rows);
void add_baselines(EvalReport& report, const std::vector<BaselineRow>& rows);

std::string format_double(double v);
// Table cell: 0.9256 -> "92.56".
std::string format_percent(double fraction);

// Per-head CLS attention as a grayscale heat grid, each cell scale x scale
// pixels, normalised so the largest patch weight is white.
RgbaImage render_attention(const AttentionMap& map, int head, int scale);
// Images laid out left to right with a gap of white pixels.
RgbaImage hstack(const std::vector<RgbaImage>& images, int gap);
RgbaImage upscale(const RgbaImage& image, int scale);

}  // namespace alphaclip
