#include "mmforge/rouge.hpp"

#include <algorithm>

#include "mmforge/unicode.hpp"

namespace mmforge::rouge {

std::vector<std::string> tokenize(std::string_view text, TokenMode mode) {
  const std::u32string s = unicode::decode_utf8(text);
  std::vector<std::string> tokens;
  if (mode == TokenMode::character) {
    for (char32_t c : s) {
      if (unicode::is_whitespace(c)) continue;
      std::string t;
      unicode::append_utf8(t, c);
      tokens.push_back(std::move(t));
    }
    return tokens;
  }
  std::string current;
  for (char32_t c : s) {
    if (unicode::is_whitespace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      unicode::append_utf8(current, c);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  // Two rolling rows of the standard table.
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeResult rouge_l(std::string_view candidate, std::string_view reference, TokenMode mode,
                    double beta) {
  const auto ref = tokenize(reference, mode);
  const auto cand = tokenize(candidate, mode);
  if (ref.empty()) throw std::invalid_argument("rouge_l: empty reference");
  if (ref.size() > kMaxTokens || cand.size() > kMaxTokens) {
    throw std::invalid_argument("rouge_l: input exceeds " + std::to_string(kMaxTokens) + " tokens");
  }
  RougeResult r;
  const auto lcs = static_cast<double>(lcs_length(cand, ref));
  r.precision = cand.empty() ? 0.0 : lcs / static_cast<double>(cand.size());
  r.recall = lcs / static_cast<double>(ref.size());
  const double b2 = beta * beta;
  if (r.precision + r.recall > 0) {
    r.f = (1.0 + b2) * r.precision * r.recall / (r.recall + b2 * r.precision);
  }
  return r;
}

TokenMode parse_mode(std::string_view name) {
  if (name == "character" || name == "char") return TokenMode::character;
  if (name == "whitespace" || name == "word") return TokenMode::whitespace;
  throw std::invalid_argument("unknown token mode '" + std::string(name) + "'");
}

}  // namespace mmforge::rouge
