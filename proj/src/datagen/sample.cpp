#include "alphaclip/datagen/sample.hpp"

#include <algorithm>
#include <cmath>

#include "alphaclip/io.hpp"

namespace alphaclip {

const char* source_name(SampleSource s) {
  switch (s) {
    case SampleSource::Grounding: return "grounding";
    case SampleSource::Classification: return "classification";
    case SampleSource::WholeImage: return "whole-image";
  }
  return "?";
}

void check_source_invariant(const RgbaSample& s) {
  const auto& a = s.image.alpha;
  const bool any_one = std::any_of(a.begin(), a.end(), [](double v) { return v == 1.0; });
  const bool any_zero = std::any_of(a.begin(), a.end(), [](double v) { return v == 0.0; });
  if (s.source == SampleSource::WholeImage) {
    if (!std::all_of(a.begin(), a.end(), [](double v) { return v == 1.0; }))
      throw InputError("whole-image sample with alpha != 1");
  } else if (!any_one || !any_zero) {
    throw InputError(std::string(source_name(s.source)) + " sample needs both focus and context pixels");
  }
}

RgbaSample make_whole_image_sample(const RgbaImage& image, const std::string& caption, const Vocabulary& vocab,
                                   int context_length, std::optional<std::string> id) {
  RgbaSample s;
  s.image = with_full_alpha(image);
  s.text = caption;
  s.tokens = vocab.encode(caption, context_length);
  s.source = SampleSource::WholeImage;
  s.region_id = std::move(id);
  return s;
}

std::vector<BatchSlot> sample_batch_slots(std::size_t region_pool, std::size_t whole_pool, double r_s, int n,
                                          Rng& rng) {
  if (!(r_s >= 0.0 && r_s <= 1.0)) throw InputError("r_s must lie in [0, 1]");
  if (n < 1) throw InputError("batch size must be >= 1");
  if (region_pool == 0 && r_s < 1.0) throw InputError("region sample pool is empty");
  if (whole_pool == 0 && r_s > 0.0) throw InputError("whole-image sample pool is empty");
  std::vector<BatchSlot> out(static_cast<std::size_t>(n));
  for (auto& slot : out) {
    slot.whole = rng.bernoulli(r_s);
    const std::size_t pool = slot.whole ? whole_pool : region_pool;
    slot.index = static_cast<std::size_t>(rng.next_u64() % pool);
  }
  return out;
}

std::vector<RgbaSample> sample_training_batch(std::span<const RgbaSample> region_pool,
                                              std::span<const RgbaSample> whole_pool, double r_s, int n,
                                              Rng& rng) {
  std::vector<RgbaSample> out;
  for (const auto& slot : sample_batch_slots(region_pool.size(), whole_pool.size(), r_s, n, rng))
    out.push_back(slot.whole ? whole_pool[slot.index] : region_pool[slot.index]);
  return out;
}

namespace {

constexpr char kShardMagic[8] = {'A', 'C', 'L', 'I', 'P', 'S', 'H', '1'};
constexpr std::uint8_t kPixU8 = 1, kPixF64 = 2;

bool byte_exact(const std::vector<double>& plane) {
  return std::all_of(plane.begin(), plane.end(), [](double v) {
    if (!(v >= 0.0 && v <= 1.0)) return false;
    return std::round(v * 255.0) / 255.0 == v;
  });
}

void put_plane(io::Writer& w, const std::vector<double>& plane) {
  if (byte_exact(plane)) {
    w.put<std::uint8_t>(kPixU8);
    for (double v : plane) w.put<std::uint8_t>(static_cast<std::uint8_t>(std::lround(v * 255.0)));
  } else {
    w.put<std::uint8_t>(kPixF64);
    for (double v : plane) w.put<double>(v);
  }
}

std::vector<double> get_plane(io::Reader& r, std::size_t n) {
  std::vector<double> plane(n);
  const auto kind = r.get<std::uint8_t>();
  if (kind == kPixU8) {
    const auto raw = r.get_bytes(n);
    for (std::size_t i = 0; i < n; ++i) plane[i] = static_cast<unsigned char>(raw[i]) / 255.0;
  } else if (kind == kPixF64) {
    for (auto& v : plane) v = r.get<double>();
  } else {
    throw CorruptionError("unknown pixel encoding " + std::to_string(kind));
  }
  return plane;
}

std::string encode_record(const RgbaSample& s) {
  io::Writer w;
  w.put<std::uint8_t>(static_cast<std::uint8_t>(s.source));
  w.put<std::uint8_t>(s.region_id.has_value());
  w.put_string(s.region_id.value_or(""));
  w.put_string(s.text);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(s.tokens.size()));
  for (int t : s.tokens) w.put<std::int32_t>(t);
  w.put<std::int32_t>(s.image.height);
  w.put<std::int32_t>(s.image.width);
  put_plane(w, s.image.rgb);
  put_plane(w, s.image.alpha);
  return w.take();
}

RgbaSample decode_record(std::string_view bytes) {
  io::Reader r(bytes);
  RgbaSample s;
  const auto src = r.get<std::uint8_t>();
  if (src < 1 || src > 3) throw CorruptionError("unknown sample source " + std::to_string(src));
  s.source = static_cast<SampleSource>(src);
  const bool has_id = r.get<std::uint8_t>() != 0;
  std::string id = r.get_string();
  if (has_id) s.region_id = std::move(id);
  s.text = r.get_string();
  const auto ntok = r.get<std::uint32_t>();
  if (ntok > r.remaining() / 4) throw CorruptionError("token count exceeds record");
  s.tokens.resize(ntok);
  for (auto& t : s.tokens) t = r.get<std::int32_t>();
  const int h = r.get<std::int32_t>(), w = r.get<std::int32_t>();
  if (h <= 0 || w <= 0 || static_cast<std::size_t>(h) * w > r.remaining())
    throw CorruptionError("implausible image size in record");
  s.image.height = h;
  s.image.width = w;
  const auto px = static_cast<std::size_t>(h) * w;
  s.image.rgb = get_plane(r, px * 3);
  s.image.alpha = get_plane(r, px);
  if (r.remaining() != 0) throw CorruptionError("trailing bytes in record");
  return s;
}

}  // namespace

std::string serialize_shard(std::span<const RgbaSample> samples) {
  io::Writer w;
  w.put_bytes(std::string_view(kShardMagic, 8));
  w.put<std::uint32_t>(kShardVersion);
  w.put<std::uint64_t>(samples.size());
  for (const auto& s : samples) {
    const std::string rec = encode_record(s);
    w.put<std::uint64_t>(rec.size());
    w.put_bytes(rec);
  }
  std::string out = w.take();
  io::append_trailer(out);
  return out;
}

std::vector<RgbaSample> parse_shard(std::string_view bytes) {
  io::Reader r(io::verify_trailer(bytes));
  if (r.get_bytes(8) != std::string_view(kShardMagic, 8)) throw CorruptionError("not a sample shard");
  const auto version = r.get<std::uint32_t>();
  if (version != kShardVersion) throw CorruptionError("unsupported shard version " + std::to_string(version));
  const auto count = r.get<std::uint64_t>();
  if (count > r.remaining() / 8) throw CorruptionError("record count exceeds shard size");
  std::vector<RgbaSample> out;
  out.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) throw CorruptionError("record " + std::to_string(i) + " truncated");
    out.push_back(decode_record(r.get_bytes(len)));
  }
  if (r.remaining() != 0) throw CorruptionError("trailing bytes after last record");
  return out;
}

void shard_write(std::span<const RgbaSample> samples, const std::filesystem::path& path) {
  io::write_file_atomic(path, serialize_shard(samples));
}

std::vector<RgbaSample> shard_read(const std::filesystem::path& path) {
  return parse_shard(io::read_file(path));
}

}  // namespace alphaclip
