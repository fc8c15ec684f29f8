#pragma once

#include <cstdint>
#include <cstring>
#include <type_traits>
#include <utility>
#include <filesystem>
#include <string>
#include <string_view>

#include "alphaclip/common.hpp"

namespace alphaclip::io {

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file and renames, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

// Little-endian byte writer/reader used by the binary formats.
class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out_.append(buf, sizeof(T));
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void put_bytes(std::string_view s) { out_.append(s); }
  const std::string& bytes() const { return out_; }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view get_bytes(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CorruptionError("truncated record");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

// Splits a checksummed blob into body, verifying the trailing FNV-1a 64.
std::string_view verify_trailer(std::string_view bytes);
void append_trailer(std::string& bytes);

}  // namespace alphaclip::io
