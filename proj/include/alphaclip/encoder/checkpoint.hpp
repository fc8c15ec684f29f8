#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "alphaclip/encoder/params.hpp"

namespace alphaclip {

// Versioned single-file tensor container:
//
//   "ACLIPCK1"  magic
//   u32         version
//   str         architecture config block (key = value lines)
//   str         free-form metadata block
//   u32         section count, then per section:
//     str       section name
//     u32       tensor count, then per tensor:
//       str     name
//       u8      dtype (1 = f32, 2 = f64)
//       u32     rank, then u64 dims
//       ...     row-major values
//   u64         FNV-1a 64 over everything above
//
// Integers are little-endian; str is a u32 length followed by bytes.
enum class DType : std::uint8_t { F32 = 1, F64 = 2 };

struct TensorRecord {
  std::string name;
  DType dtype = DType::F32;
  std::vector<std::uint64_t> shape;
  std::vector<double> values;
};

struct TensorSection {
  std::string name;
  std::vector<TensorRecord> tensors;

  const TensorRecord* find(const std::string& tensor) const;
};

struct TensorContainer {
  static constexpr std::uint32_t kVersion = 1;
  std::string config;
  std::string meta;
  std::vector<TensorSection> sections;

  const TensorSection* find(const std::string& section) const;

  std::string serialize() const;
  // Throws CorruptionError on checksum, magic, or structural failures.
  static TensorContainer parse(std::string_view bytes);
};

TensorRecord to_record(const std::string& name, const Mat& m, DType dtype);
Mat from_record(const TensorRecord& r);

TensorSection params_section(const EncoderParams& params, DType dtype);
// Checks every tensor against the shapes implied by arch; ShapeError names the tensor.
EncoderParams params_from_section(const TensorSection& section, const ArchConfig& arch);

void save_params(const std::filesystem::path& path, const EncoderParams& params,
                 DType dtype = DType::F32);
EncoderParams load_params(const std::filesystem::path& path);
// As above, but the file must agree with the expected architecture.
EncoderParams load_params(const std::filesystem::path& path, const ArchConfig& expected);

}  // namespace alphaclip
