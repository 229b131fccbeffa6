#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace mmforge {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Every pipeline threshold. The fetch and batching knobs are operational
// choices rather than part of the filtering recipe.
struct PipelineConfig {
  int min_side_px = 150;
  double aspect_min = 0.5;
  double aspect_max = 2.0;
  double nsfw_reject_min = 0.1;  // reject if score >= this
  int hamming_intra_max = 5;
  int cross_sample_size = 60000;
  int cross_dup_max = 10;
  double sim_min = 0.20;
  int images_min = 2;
  int images_max = 5;
  int sentences_min = 10;
  int sentences_max = 100;
  int max_tokens = 4096;
  int alt_freq_max = 10;
  int pair_percentile = 30;
  int alt_min_chars = 3;
  int per_domain_url_cap = 1000;
  double fetch_rate_per_host = 2.0;
  int fetch_concurrency = 16;
  std::uint64_t rng_seed = 0;

  // Fetch policy.
  std::string group_by = "host";
  int fetch_timeout_ms = 10000;
  long long fetch_max_bytes = 10LL * 1024 * 1024;
  std::string user_agent = "mmforge/0.1";

  // Scoring.
  int embed_batch_size = 64;

  // Alt-text filter tables.
  std::vector<std::string> autogen_prefixes = {
      "画像に alt 属性が指定されていません。",
      "この画像には alt 属性が指定されておらず、",
  };
  std::vector<std::string> filename_keywords = {
      "写真", "キャプチャ", "画像", "スクリーンショット",
      "全画面キャプチャ", "ファイル", "コメント", "コピー",
  };
  std::vector<std::string> nsfw_wordlist;

  // Throws ConfigError on the first violated invariant.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  // Missing keys keep their defaults; unknown keys and type mismatches throw.
  static PipelineConfig from_json(const nlohmann::json& j);
  static PipelineConfig load(const std::filesystem::path& path);
};

}  // namespace mmforge
