#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace alphaclip::kv {

// One "key = value" line; section is the most recent "[name]" header.
struct Entry {
  std::string section;
  std::string key;
  std::string value;
  int line = 0;
};

// '#' starts a comment. Values may be double-quoted to keep spaces at the ends.
// Throws ConfigError on malformed lines.
std::vector<Entry> parse(const std::string& text);

std::string trim(const std::string& s);
std::string quote_if_needed(const std::string& v);

double to_double(const Entry& e);
int to_int(const Entry& e);
std::uint64_t to_u64(const Entry& e);
bool to_bool(const Entry& e);
std::vector<std::string> to_list(const Entry& e);  // comma separated

}  // namespace alphaclip::kv
