#include "mpr/text.hpp"

namespace mpr::text {

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = to_lower(c);
  return out;
}

std::string trim(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size()) {
    const auto n = whitespace_length(s, begin);
    if (n == 0) break;
    begin += n;
  }
  std::size_t end = s.size();
  // Scan forward for the last non-whitespace position; multi-byte spaces make
  // a backward scan awkward.
  std::size_t last = begin;
  for (std::size_t i = begin; i < s.size();) {
    const auto n = whitespace_length(s, i);
    if (n == 0) {
      ++i;
      last = i;
    } else {
      i += n;
    }
  }
  end = last;
  return std::string(s.substr(begin, end - begin));
}

std::size_t whitespace_length(std::string_view s, std::size_t pos) noexcept {
  if (pos >= s.size()) return 0;
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) return is_ascii_space(static_cast<char>(b0)) ? 1 : 0;
  auto byte = [&](std::size_t k) -> unsigned {
    return pos + k < s.size() ? static_cast<unsigned char>(s[pos + k]) : 0u;
  };
  if (b0 == 0xC2) {
    const unsigned b1 = byte(1);
    return (b1 == 0x85 || b1 == 0xA0) ? 2 : 0;
  }
  if (b0 == 0xE1 && byte(1) == 0x9A && byte(2) == 0x80) return 3;  // U+1680
  if (b0 == 0xE2) {
    const unsigned b1 = byte(1);
    const unsigned b2 = byte(2);
    if (b1 == 0x80 && ((b2 >= 0x80 && b2 <= 0x8A) || b2 == 0xA8 || b2 == 0xA9 || b2 == 0xAF)) return 3;
    if (b1 == 0x81 && b2 == 0x9F) return 3;  // U+205F
  }
  if (b0 == 0xE3 && byte(1) == 0x80 && byte(2) == 0x80) return 3;  // U+3000
  return 0;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::string current;
  for (std::size_t i = 0; i < s.size();) {
    const auto n = whitespace_length(s, i);
    if (n > 0) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
      i += n;
    } else {
      current.push_back(s[i++]);
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

std::size_t codepoint_count(std::string_view s) noexcept {
  std::size_t n = 0;
  for (char c : s) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace mpr::text
