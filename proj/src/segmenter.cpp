#include "mmforge/segmenter.hpp"

#include <string>

#include "mmforge/unicode.hpp"

namespace mmforge::segmenter {
namespace {

using unicode::decode_utf8;
using unicode::encode_utf8;

constexpr bool is_terminal(char32_t c) {
  return c == U'。' || c == U'．' || c == U'！' || c == U'？' || c == U'!' || c == U'?';
}

void renumber(std::vector<Sentence>& v) {
  for (std::size_t i = 0; i < v.size(); ++i) v[i].index = i;
}

}  // namespace

std::vector<Sentence> segment(std::string_view text) {
  const std::u32string s = decode_utf8(text);
  std::vector<Sentence> out;
  std::u32string current;
  auto flush = [&] {
    std::string piece = unicode::trim(encode_utf8(current));
    if (!piece.empty()) out.push_back(Sentence{out.size(), std::move(piece)});
    current.clear();
  };
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char32_t c = s[i];
    if (c == U'\n' || c == U'\r') {
      flush();
      continue;
    }
    current.push_back(c);
    if (is_terminal(c) && (i + 1 == s.size() || !is_terminal(s[i + 1]))) flush();
  }
  flush();
  return out;
}

bool is_symbol_only(std::string_view text) {
  for (char32_t c : decode_utf8(text)) {
    if (unicode::is_japanese(c) || unicode::is_ascii_letter(c) || unicode::is_digit(c)) {
      return false;
    }
  }
  return true;
}

std::vector<Sentence> merge_symbol_only(const std::vector<Sentence>& sentences) {
  std::vector<Sentence> out;
  std::string pending;  // leading symbol-only text waiting for a successor
  for (const auto& s : sentences) {
    if (is_symbol_only(s.text)) {
      if (out.empty()) {
        pending += s.text;
      } else {
        out.back().text += s.text;
      }
      continue;
    }
    out.push_back(Sentence{0, pending + s.text});
    pending.clear();
  }
  if (!pending.empty()) out.push_back(Sentence{0, std::move(pending)});
  renumber(out);
  return out;
}

bool is_closing_bracket(char32_t c) {
  switch (c) {
    case U'」':
    case U'』':
    case U'）':
    case U'〕':
    case U'】':
    case U'｝':
    case U'〉':
    case U'》':
    case U')':
      return true;
    default:
      return false;
  }
}

std::vector<Sentence> fix_closing_brackets(const std::vector<Sentence>& sentences) {
  std::vector<Sentence> out;
  for (const auto& s : sentences) {
    if (out.empty()) {
      out.push_back(s);
      continue;
    }
    const std::u32string u = decode_utf8(s.text);
    std::size_t run = 0;
    while (run < u.size() && is_closing_bracket(u[run])) ++run;
    if (run == 0) {
      out.push_back(s);
      continue;
    }
    out.back().text += encode_utf8(std::u32string_view(u).substr(0, run));
    if (run < u.size()) out.push_back(Sentence{0, encode_utf8(std::u32string_view(u).substr(run))});
  }
  renumber(out);
  return out;
}

std::vector<Sentence> split_sentences(std::string_view text) {
  std::vector<Sentence> sentences = segment(text);
  if (sentences.empty()) return sentences;
  sentences = fix_closing_brackets(merge_symbol_only(sentences));
  std::vector<Sentence> out;
  for (auto& s : sentences) {
    std::string t = unicode::trim(s.text);
    if (!t.empty()) out.push_back(Sentence{out.size(), std::move(t)});
  }
  return out;
}

}  // namespace mmforge::segmenter
