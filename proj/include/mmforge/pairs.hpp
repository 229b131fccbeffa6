#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmforge/config.hpp"
#include "mmforge/funnel.hpp"
#include "mmforge/scoring.hpp"
#include "mmforge/types.hpp"

namespace mmforge::pairs {

struct AltFilterTables {
  std::vector<std::string> autogen_prefixes;
  std::vector<std::string> filename_keywords;
  std::vector<std::string> nsfw_wordlist;

  static AltFilterTables from_config(const PipelineConfig& cfg);
};

bool has_japanese(std::string_view text);

// Starts with one of the CMS placeholder phrases emitted for missing alt.
bool is_autogenerated_alt(std::string_view text, const AltFilterTables& tables);

// Starts with a file-name keyword and has no Japanese after it, e.g.
// "写真 2015-01-20 18 12 33".
bool is_filename_alt(std::string_view text, const AltFilterTables& tables);

bool contains_listed_word(std::string_view text, const AltFilterTables& tables);

// Trims White_Space at both ends; each internal run of two or more
// White_Space scalars becomes one U+0020.
std::string normalize_whitespace(std::string_view text);

// Indices of pairs whose alt text occurs at most max_freq times.
std::vector<std::size_t> alt_frequency_keep(const std::vector<std::string>& alts, int max_freq);
std::vector<AltPair> dedup_alt_frequency(const std::vector<AltPair>& pairs, int max_freq);

// First occurrence of every (phash, alt) key.
std::vector<AltPair> dedup_phash_alt(const std::vector<AltPair>& pairs);

struct AltCandidate {
  CandidateImage image;  // phash required
  std::optional<std::string> alt_text;
  scoring::Bytes bytes;
};

struct ExtractResult {
  std::vector<AltPair> pairs;
  FunnelCounts funnel;
  std::vector<std::string> warnings;
};

// Text filters, normalization, both dedups, dual scoring, then a
// per-scorer nearest-rank percentile cut; a pair must clear both cuts.
ExtractResult extract_pairs(const std::vector<AltCandidate>& candidates, const AltFilterTables& tables,
                            scoring::EmbeddingProvider& scorer_a,
                            scoring::EmbeddingProvider& scorer_b, const PipelineConfig& cfg);

}  // namespace mmforge::pairs
