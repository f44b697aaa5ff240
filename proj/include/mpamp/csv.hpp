#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

namespace mpamp::csv {

// RFC 4180 quoting: fields with commas, quotes or line breaks are wrapped in
// quotes and embedded quotes doubled.
inline std::string quote(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void header(std::ostream& os, std::string_view config_hash, std::uint64_t seed) {
  os << "# config_hash=" << config_hash << " seed=" << seed << '\n';
}

}  // namespace mpamp::csv
