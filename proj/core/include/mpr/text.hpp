#pragma once

#include <string>
#include <string_view>
#include <vector>

// Small ASCII/UTF-8 helpers shared by the text-processing modules. Case
// operations only touch ASCII letters; other bytes pass through untouched.
namespace mpr::text {

constexpr bool is_upper(char c) noexcept { return c >= 'A' && c <= 'Z'; }
constexpr bool is_lower(char c) noexcept { return c >= 'a' && c <= 'z'; }
constexpr bool is_letter(char c) noexcept { return is_upper(c) || is_lower(c); }
constexpr bool is_digit(char c) noexcept { return c >= '0' && c <= '9'; }
constexpr bool is_alnum(char c) noexcept { return is_letter(c) || is_digit(c); }
constexpr bool is_ascii_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
constexpr char to_lower(char c) noexcept { return is_upper(c) ? static_cast<char>(c - 'A' + 'a') : c; }
constexpr char to_upper(char c) noexcept { return is_lower(c) ? static_cast<char>(c - 'a' + 'A') : c; }
constexpr char flip_case(char c) noexcept {
  return is_upper(c) ? to_lower(c) : (is_lower(c) ? to_upper(c) : c);
}

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Byte length of the Unicode whitespace sequence starting at `pos`, or 0.
// Recognizes ASCII whitespace, U+0085, U+00A0, U+1680, U+2000..U+200A,
// U+2028, U+2029, U+202F, U+205F and U+3000.
std::size_t whitespace_length(std::string_view s, std::size_t pos) noexcept;

// Splits on runs of Unicode whitespace; never yields empty pieces.
std::vector<std::string> split_whitespace(std::string_view s);

// Number of UTF-8 code points (continuation bytes are not counted).
std::size_t codepoint_count(std::string_view s) noexcept;

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Replaces every `{name}` placeholder from `vars`; unknown placeholders stay verbatim.
template <typename Map>
std::string render(std::string_view tmpl, const Map& vars) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const std::string key(tmpl.substr(i + 1, close - i - 1));
        if (const auto it = vars.find(key); it != vars.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i++]);
  }
  return out;
}

}  // namespace mpr::text
