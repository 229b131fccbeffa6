#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mmforge::unicode {

// Decodes UTF-8 into scalar values. Malformed sequences decode to U+FFFD,
// one replacement per offending byte.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view scalars);
void append_utf8(std::string& out, char32_t cp);

// Number of Unicode scalars in a UTF-8 string.
std::size_t scalar_count(std::string_view text);

constexpr bool is_hiragana(char32_t c) { return c >= 0x3041 && c <= 0x309F; }
constexpr bool is_katakana(char32_t c) {
  return (c >= 0x30A0 && c <= 0x30FF) || (c >= 0xFF66 && c <= 0xFF9F);
}
constexpr bool is_kanji(char32_t c) { return c >= 0x4E00 && c <= 0x9FFF; }
constexpr bool is_japanese(char32_t c) {
  return is_hiragana(c) || is_katakana(c) || is_kanji(c);
}

// ASCII letters plus their full-width forms (U+FF21..FF3A, U+FF41..FF5A).
constexpr bool is_ascii_letter(char32_t c) {
  return (c >= U'A' && c <= U'Z') || (c >= U'a' && c <= U'z') ||
         (c >= 0xFF21 && c <= 0xFF3A) || (c >= 0xFF41 && c <= 0xFF5A);
}

// ASCII digits plus full-width digits U+FF10..FF19.
constexpr bool is_digit(char32_t c) {
  return (c >= U'0' && c <= U'9') || (c >= 0xFF10 && c <= 0xFF19);
}

// Unicode White_Space property.
constexpr bool is_whitespace(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 ||
         c == 0x1680 || (c >= 0x2000 && c <= 0x200A) || c == 0x2028 ||
         c == 0x2029 || c == 0x202F || c == 0x205F || c == 0x3000;
}

bool contains_japanese(std::string_view text);

// Strips leading and trailing White_Space scalars.
std::string trim(std::string_view text);

}  // namespace mmforge::unicode
