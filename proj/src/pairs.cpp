#include "mmforge/pairs.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <unordered_map>
#include <utility>

#include "mmforge/unicode.hpp"

namespace mmforge::pairs {

AltFilterTables AltFilterTables::from_config(const PipelineConfig& cfg) {
  return AltFilterTables{cfg.autogen_prefixes, cfg.filename_keywords, cfg.nsfw_wordlist};
}

bool has_japanese(std::string_view text) { return unicode::contains_japanese(text); }

bool is_autogenerated_alt(std::string_view text, const AltFilterTables& tables) {
  for (const auto& prefix : tables.autogen_prefixes) {
    if (text.starts_with(prefix)) return true;
  }
  return false;
}

bool is_filename_alt(std::string_view text, const AltFilterTables& tables) {
  for (const auto& keyword : tables.filename_keywords) {
    if (text.starts_with(keyword) && !unicode::contains_japanese(text.substr(keyword.size()))) {
      return true;
    }
  }
  return false;
}

bool contains_listed_word(std::string_view text, const AltFilterTables& tables) {
  for (const auto& word : tables.nsfw_wordlist) {
    if (!word.empty() && text.find(word) != std::string_view::npos) return true;
  }
  return false;
}

std::string normalize_whitespace(std::string_view text) {
  const std::u32string s = unicode::decode_utf8(text);
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && unicode::is_whitespace(s[b])) ++b;
  while (e > b && unicode::is_whitespace(s[e - 1])) --e;
  std::u32string out;
  std::size_t i = b;
  while (i < e) {
    if (!unicode::is_whitespace(s[i])) {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t run = i;
    while (run < e && unicode::is_whitespace(s[run])) ++run;
    if (run - i >= 2) {
      out.push_back(U' ');
    } else {
      out.push_back(s[i]);
    }
    i = run;
  }
  return unicode::encode_utf8(out);
}

std::vector<std::size_t> alt_frequency_keep(const std::vector<std::string>& alts, int max_freq) {
  std::unordered_map<std::string_view, int> freq;
  for (const auto& a : alts) ++freq[a];
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < alts.size(); ++i) {
    if (freq[alts[i]] <= max_freq) kept.push_back(i);
  }
  return kept;
}

std::vector<AltPair> dedup_alt_frequency(const std::vector<AltPair>& pairs, int max_freq) {
  std::vector<std::string> alts;
  alts.reserve(pairs.size());
  for (const auto& p : pairs) alts.push_back(p.alt_text);
  std::vector<AltPair> out;
  for (std::size_t i : alt_frequency_keep(alts, max_freq)) out.push_back(pairs[i]);
  return out;
}

std::vector<AltPair> dedup_phash_alt(const std::vector<AltPair>& pairs) {
  std::set<std::pair<std::uint64_t, std::string>> seen;
  std::vector<AltPair> out;
  for (const auto& p : pairs) {
    const std::uint64_t bits = p.image.phash ? p.image.phash->bits : 0;
    if (seen.emplace(bits, p.alt_text).second) out.push_back(p);
  }
  return out;
}

ExtractResult extract_pairs(const std::vector<AltCandidate>& candidates, const AltFilterTables& tables,
                            scoring::EmbeddingProvider& scorer_a,
                            scoring::EmbeddingProvider& scorer_b, const PipelineConfig& cfg) {
  ExtractResult r;
  r.funnel.input_count = candidates.size();

  struct Survivor {
    std::size_t candidate;
    std::string alt;
  };
  std::vector<Survivor> survivors;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& alt = candidates[i].alt_text;
    if (!alt) {
      r.funnel.reject("no_alt");
      continue;
    }
    if (!has_japanese(*alt)) {
      r.funnel.reject("no_japanese");
      continue;
    }
    std::string normalized = normalize_whitespace(*alt);
    if (unicode::scalar_count(normalized) < static_cast<std::size_t>(cfg.alt_min_chars)) {
      r.funnel.reject("too_short");
      continue;
    }
    if (is_autogenerated_alt(*alt, tables)) {
      r.funnel.reject("autogenerated_alt");
      continue;
    }
    if (is_filename_alt(*alt, tables)) {
      r.funnel.reject("filename_alt");
      continue;
    }
    if (contains_listed_word(*alt, tables)) {
      r.funnel.reject("nsfw_text");
      continue;
    }
    survivors.push_back(Survivor{i, std::move(normalized)});
  }

  std::vector<std::string> alts;
  for (const auto& s : survivors) alts.push_back(s.alt);
  std::vector<Survivor> frequent_ok;
  for (std::size_t k : alt_frequency_keep(alts, cfg.alt_freq_max)) frequent_ok.push_back(survivors[k]);
  r.funnel.reject("alt_too_frequent", survivors.size() - frequent_ok.size());

  std::vector<Survivor> unique;
  std::set<std::pair<std::uint64_t, std::string>> seen;
  for (auto& s : frequent_ok) {
    const auto& im = candidates[s.candidate].image;
    if (!im.phash) throw std::invalid_argument("image " + im.url + " has no phash");
    if (seen.emplace(im.phash->bits, s.alt).second) unique.push_back(std::move(s));
  }
  r.funnel.reject("duplicate_phash_alt", frequent_ok.size() - unique.size());

  if (unique.empty()) return r;

  std::vector<std::string> texts;
  std::vector<scoring::Bytes> images;
  for (const auto& s : unique) {
    texts.push_back(s.alt);
    images.push_back(candidates[s.candidate].bytes);
  }
  auto score_with = [&](scoring::EmbeddingProvider& p) {
    const auto tv = p.embed_texts(texts);
    const auto iv = p.embed_images(images);
    std::vector<double> scores;
    for (std::size_t k = 0; k < unique.size(); ++k) scores.push_back(scoring::cosine(iv[k], tv[k]));
    return scores;
  };
  const std::vector<double> a = score_with(scorer_a);
  const std::vector<double> b = score_with(scorer_b);
  const double thr_a = scoring::percentile_threshold(a, cfg.pair_percentile);
  const double thr_b = scoring::percentile_threshold(b, cfg.pair_percentile);
  auto all_equal = [](const std::vector<double>& v) {
    return std::adjacent_find(v.begin(), v.end(), std::not_equal_to<>()) == v.end();
  };
  if (all_equal(a) || all_equal(b)) {
    r.warnings.push_back("all pair scores are equal; the percentile cut removes every pair");
  }

  for (std::size_t k = 0; k < unique.size(); ++k) {
    if (!(a[k] > thr_a && b[k] > thr_b)) {
      r.funnel.reject("below_percentile");
      continue;
    }
    AltPair p;
    p.image = candidates[unique[k].candidate].image;
    p.alt_text = unique[k].alt;
    p.score_a = a[k];
    p.score_b = b[k];
    r.pairs.push_back(std::move(p));
  }
  r.funnel.output_count = r.pairs.size();
  return r;
}

}  // namespace mmforge::pairs
