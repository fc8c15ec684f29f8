#include "alphaclip/io.hpp"

#include <fstream>
#include <iterator>

namespace alphaclip::io {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string_view verify_trailer(std::string_view bytes) {
  if (bytes.size() < sizeof(std::uint64_t)) throw CorruptionError("file too short for checksum");
  const auto body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
  Fnv1a64 h;
  h.update(body);
  if (h.digest() != stored)
    throw CorruptionError("checksum mismatch: stored " + hex64(stored) + ", computed " + hex64(h.digest()));
  return body;
}

void append_trailer(std::string& bytes) {
  Fnv1a64 h;
  h.update(bytes);
  const std::uint64_t d = h.digest();
  char buf[sizeof d];
  std::memcpy(buf, &d, sizeof d);
  bytes.append(buf, sizeof d);
}

}  // namespace alphaclip::io
