#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "alphaclip/common.hpp"
#include "alphaclip/encoder/image.hpp"
#include "alphaclip/encoder/text.hpp"

namespace alphaclip {

enum class SampleSource : std::uint8_t { Grounding = 1, Classification = 2, WholeImage = 3 };
const char* source_name(SampleSource s);

struct RgbaSample {
  RgbaImage image;
  std::string text;
  TokenIds tokens;
  SampleSource source = SampleSource::WholeImage;
  std::optional<std::string> region_id;

  bool operator==(const RgbaSample&) const = default;
};

// Whole-image samples need alpha == 1 everywhere; region samples need at
// least one 1 and one 0. Throws InputError otherwise.
void check_source_invariant(const RgbaSample& s);

RgbaSample make_whole_image_sample(const RgbaImage& image, const std::string& caption, const Vocabulary& vocab,
                                   int context_length, std::optional<std::string> id = std::nullopt);

struct BatchSlot {
  bool whole = false;
  std::size_t index = 0;  // into the pool selected by `whole`
};

// Each slot independently comes from the whole-image pool with probability r_s.
std::vector<BatchSlot> sample_batch_slots(std::size_t region_pool, std::size_t whole_pool, double r_s, int n,
                                          Rng& rng);

std::vector<RgbaSample> sample_training_batch(std::span<const RgbaSample> region_pool,
                                              std::span<const RgbaSample> whole_pool, double r_s, int n,
                                              Rng& rng);

// Shard layout:
//   "ACLIPSH1", u32 version, u64 record count,
//   per record: u64 byte length, record bytes,
//   u64 FNV-1a 64 of everything before it.
// Pixel planes are stored as bytes when every value is exactly k/255,
// otherwise as f64, so the roundtrip is always lossless.
inline constexpr std::uint32_t kShardVersion = 1;
std::string serialize_shard(std::span<const RgbaSample> samples);
std::vector<RgbaSample> parse_shard(std::string_view bytes);
void shard_write(std::span<const RgbaSample> samples, const std::filesystem::path& path);
std::vector<RgbaSample> shard_read(const std::filesystem::path& path);

}  // namespace alphaclip
