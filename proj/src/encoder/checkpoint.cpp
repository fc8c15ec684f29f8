#include "alphaclip/encoder/checkpoint.hpp"

#include <sstream>

#include "alphaclip/io.hpp"

namespace alphaclip {

namespace {

constexpr char kMagic[8] = {'A', 'C', 'L', 'I', 'P', 'C', 'K', '1'};

std::string shape_str(const std::vector<std::uint64_t>& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

}  // namespace

const TensorRecord* TensorSection::find(const std::string& tensor) const {
  for (const auto& t : tensors)
    if (t.name == tensor) return &t;
  return nullptr;
}

const TensorSection* TensorContainer::find(const std::string& section) const {
  for (const auto& s : sections)
    if (s.name == section) return &s;
  return nullptr;
}

std::string TensorContainer::serialize() const {
  io::Writer w;
  w.put_bytes(std::string_view(kMagic, sizeof kMagic));
  w.put<std::uint32_t>(kVersion);
  w.put_string(config);
  w.put_string(meta);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    w.put_string(s.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.tensors.size()));
    for (const auto& t : s.tensors) {
      w.put_string(t.name);
      w.put<std::uint8_t>(static_cast<std::uint8_t>(t.dtype));
      w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) w.put<std::uint64_t>(d);
      for (double v : t.values) {
        if (t.dtype == DType::F32)
          w.put<float>(static_cast<float>(v));
        else
          w.put<double>(v);
      }
    }
  }
  std::string out = w.take();
  io::append_trailer(out);
  return out;
}

TensorContainer TensorContainer::parse(std::string_view bytes) {
  io::Reader r(io::verify_trailer(bytes));
  if (r.get_bytes(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic))
    throw CorruptionError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw CorruptionError("unsupported checkpoint version " + std::to_string(version));
  TensorContainer c;
  c.config = r.get_string();
  c.meta = r.get_string();
  const auto nsec = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < nsec; ++i) {
    TensorSection s;
    s.name = r.get_string();
    const auto nt = r.get<std::uint32_t>();
    for (std::uint32_t j = 0; j < nt; ++j) {
      TensorRecord t;
      t.name = r.get_string();
      const auto dt = r.get<std::uint8_t>();
      if (dt != 1 && dt != 2) throw CorruptionError("tensor " + t.name + " has unknown dtype");
      t.dtype = static_cast<DType>(dt);
      const auto rank = r.get<std::uint32_t>();
      if (rank > 8) throw CorruptionError("tensor " + t.name + " has implausible rank");
      std::uint64_t count = 1;
      for (std::uint32_t k = 0; k < rank; ++k) {
        t.shape.push_back(r.get<std::uint64_t>());
        count *= t.shape.back();
      }
      const std::size_t width = t.dtype == DType::F32 ? sizeof(float) : sizeof(double);
      if (count > r.remaining() / width) throw CorruptionError("tensor " + t.name + " is truncated");
      t.values.resize(count);
      for (auto& v : t.values) v = t.dtype == DType::F32 ? r.get<float>() : r.get<double>();
      s.tensors.push_back(std::move(t));
    }
    c.sections.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw CorruptionError("trailing bytes after last section");
  return c;
}

TensorRecord to_record(const std::string& name, const Mat& m, DType dtype) {
  TensorRecord r;
  r.name = name;
  r.dtype = dtype;
  r.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  r.values.assign(m.data(), m.data() + m.size());
  if (dtype == DType::F32)
    for (auto& v : r.values) v = static_cast<double>(static_cast<float>(v));
  return r;
}

Mat from_record(const TensorRecord& r) {
  if (r.shape.size() != 2) throw ShapeError("tensor " + r.name + " is not rank 2");
  Mat m(static_cast<Eigen::Index>(r.shape[0]), static_cast<Eigen::Index>(r.shape[1]));
  std::copy(r.values.begin(), r.values.end(), m.data());
  return m;
}

TensorSection params_section(const EncoderParams& params, DType dtype) {
  TensorSection s;
  s.name = "params";
  params.for_each([&](const std::string& name, const Mat& m) { s.tensors.push_back(to_record(name, m, dtype)); });
  return s;
}

EncoderParams params_from_section(const TensorSection& section, const ArchConfig& arch) {
  EncoderParams p = EncoderParams::zeros(arch);
  std::size_t used = 0;
  p.for_each([&](const std::string& name, Mat& m) {
    const TensorRecord* r = section.find(name);
    if (!r) throw ShapeError("checkpoint is missing tensor " + name);
    const std::vector<std::uint64_t> want{static_cast<std::uint64_t>(m.rows()),
                                          static_cast<std::uint64_t>(m.cols())};
    if (r->shape != want)
      throw ShapeError("tensor " + name + " has shape " + shape_str(r->shape) + ", expected " + shape_str(want));
    m = from_record(*r);
    ++used;
  });
  if (used != section.tensors.size()) throw ShapeError("checkpoint holds tensors this architecture lacks");
  return p;
}

void save_params(const std::filesystem::path& path, const EncoderParams& params, DType dtype) {
  TensorContainer c;
  c.config = params.arch.to_text();
  c.sections.push_back(params_section(params, dtype));
  io::write_file_atomic(path, c.serialize());
}

EncoderParams load_params(const std::filesystem::path& path) {
  const auto c = TensorContainer::parse(io::read_file(path));
  const auto* s = c.find("params");
  if (!s) throw CorruptionError("checkpoint has no params section");
  return params_from_section(*s, ArchConfig::from_text(c.config));
}

EncoderParams load_params(const std::filesystem::path& path, const ArchConfig& expected) {
  const auto c = TensorContainer::parse(io::read_file(path));
  const auto* s = c.find("params");
  if (!s) throw CorruptionError("checkpoint has no params section");
  EncoderParams p = params_from_section(*s, expected);
  p.temperature = ArchConfig::from_text(c.config).temperature;
  if (p.temperature != expected.temperature)
    throw ShapeError("checkpoint temperature differs from the expected architecture");
  return p;
}

}  // namespace alphaclip
