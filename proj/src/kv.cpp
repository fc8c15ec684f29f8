#include "alphaclip/kv.hpp"

#include <cerrno>
#include <cstdlib>
#include <sstream>

#include "alphaclip/common.hpp"

namespace alphaclip::kv {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string quote_if_needed(const std::string& v) {
  if (v.empty() || v.front() == ' ' || v.back() == ' ' || v.find('#') != std::string::npos ||
      v.front() == '"')
    return '"' + v + '"';
  return v;
}

std::vector<Entry> parse(const std::string& text) {
  std::vector<Entry> out;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.line = lineno;
    std::string v = trim(line.substr(eq + 1));
    if (!v.empty() && v.front() == '"') {
      const auto close = v.find('"', 1);
      if (close == std::string::npos) throw ConfigError(e.key + ": unterminated quoted value");
      e.value = v.substr(1, close - 1);
    } else {
      if (const auto hash = v.find('#'); hash != std::string::npos) v = trim(v.substr(0, hash));
      e.value = v;
    }
    if (e.key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    out.push_back(std::move(e));
  }
  return out;
}

namespace {
std::string full_key(const Entry& e) { return e.section.empty() ? e.key : e.section + "." + e.key; }
}  // namespace

double to_double(const Entry& e) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(e.value.c_str(), &end);
  if (e.value.empty() || *end != '\0' || errno == ERANGE)
    throw ConfigError(full_key(e) + ": expected a number, got '" + e.value + "'");
  return v;
}

int to_int(const Entry& e) {
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(e.value.c_str(), &end, 10);
  if (e.value.empty() || *end != '\0' || errno == ERANGE || v < INT32_MIN || v > INT32_MAX)
    throw ConfigError(full_key(e) + ": expected an integer, got '" + e.value + "'");
  return static_cast<int>(v);
}

std::uint64_t to_u64(const Entry& e) {
  errno = 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(e.value.c_str(), &end, 10);
  if (e.value.empty() || e.value[0] == '-' || *end != '\0' || errno == ERANGE)
    throw ConfigError(full_key(e) + ": expected an unsigned integer, got '" + e.value + "'");
  return static_cast<std::uint64_t>(v);
}

bool to_bool(const Entry& e) {
  if (e.value == "true" || e.value == "1") return true;
  if (e.value == "false" || e.value == "0") return false;
  throw ConfigError(full_key(e) + ": expected true or false, got '" + e.value + "'");
}

std::vector<std::string> to_list(const Entry& e) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(e.value);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace alphaclip::kv
