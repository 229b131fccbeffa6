#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mmforge::rouge {

enum class TokenMode { character, whitespace };

struct RougeResult {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

inline constexpr std::size_t kMaxTokens = 10000;

// character: one token per Unicode scalar, whitespace dropped.
// whitespace: maximal non-whitespace runs.
std::vector<std::string> tokenize(std::string_view text, TokenMode mode);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

// ROUGE-L over the longest common subsequence of the token sequences.
// F = (1 + beta^2) P R / (R + beta^2 P), or 0 when P + R = 0.
// Throws std::invalid_argument on an empty reference or inputs longer
// than kMaxTokens.
RougeResult rouge_l(std::string_view candidate, std::string_view reference,
                    TokenMode mode = TokenMode::character, double beta = 1.0);

TokenMode parse_mode(std::string_view name);

}  // namespace mmforge::rouge
