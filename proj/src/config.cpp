#include "mmforge/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace mmforge {
namespace {

template <class Config, class Visitor>
void visit_fields(Config& c, Visitor&& v) {
  v("min_side_px", c.min_side_px);
  v("aspect_min", c.aspect_min);
  v("aspect_max", c.aspect_max);
  v("nsfw_reject_min", c.nsfw_reject_min);
  v("hamming_intra_max", c.hamming_intra_max);
  v("cross_sample_size", c.cross_sample_size);
  v("cross_dup_max", c.cross_dup_max);
  v("sim_min", c.sim_min);
  v("images_min", c.images_min);
  v("images_max", c.images_max);
  v("sentences_min", c.sentences_min);
  v("sentences_max", c.sentences_max);
  v("max_tokens", c.max_tokens);
  v("alt_freq_max", c.alt_freq_max);
  v("pair_percentile", c.pair_percentile);
  v("alt_min_chars", c.alt_min_chars);
  v("per_domain_url_cap", c.per_domain_url_cap);
  v("fetch_rate_per_host", c.fetch_rate_per_host);
  v("fetch_concurrency", c.fetch_concurrency);
  v("rng_seed", c.rng_seed);
  v("group_by", c.group_by);
  v("fetch_timeout_ms", c.fetch_timeout_ms);
  v("fetch_max_bytes", c.fetch_max_bytes);
  v("user_agent", c.user_agent);
  v("embed_batch_size", c.embed_batch_size);
  v("autogen_prefixes", c.autogen_prefixes);
  v("filename_keywords", c.filename_keywords);
  v("nsfw_wordlist", c.nsfw_wordlist);
}

template <class T>
void read_field(const nlohmann::json& value, const std::string& key, T& out) {
  using nlohmann::json;
  if constexpr (std::is_same_v<T, std::string>) {
    if (!value.is_string()) throw ConfigError("config key '" + key + "' must be a string");
    out = value.get<std::string>();
  } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
    if (!value.is_array()) throw ConfigError("config key '" + key + "' must be an array of strings");
    out.clear();
    for (const auto& e : value) {
      if (!e.is_string()) throw ConfigError("config key '" + key + "' must be an array of strings");
      out.push_back(e.get<std::string>());
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!value.is_number()) throw ConfigError("config key '" + key + "' must be a number");
    out = value.get<T>();
  } else if constexpr (std::is_unsigned_v<T>) {
    if (!value.is_number_unsigned()) {
      throw ConfigError("config key '" + key + "' must be a non-negative integer");
    }
    out = value.get<T>();
  } else {
    if (!value.is_number_integer()) throw ConfigError("config key '" + key + "' must be an integer");
    out = value.get<T>();
  }
}

}  // namespace

void PipelineConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(min_side_px > 0, "min_side_px must be positive");
  require(aspect_min > 0 && aspect_max > 0, "aspect bounds must be positive");
  require(aspect_min <= aspect_max, "aspect_min must not exceed aspect_max");
  require(nsfw_reject_min > 0, "nsfw_reject_min must be positive");
  require(hamming_intra_max > 0 && hamming_intra_max <= 64, "hamming_intra_max must be in [1, 64]");
  require(cross_sample_size > 0, "cross_sample_size must be positive");
  require(cross_dup_max > 0, "cross_dup_max must be positive");
  require(sim_min > 0, "sim_min must be positive");
  require(images_min > 0 && images_max > 0, "image bounds must be positive");
  require(images_min <= images_max, "images_min must not exceed images_max");
  require(sentences_min > 0 && sentences_max > 0, "sentence bounds must be positive");
  require(sentences_min <= sentences_max, "sentences_min must not exceed sentences_max");
  require(max_tokens > 0, "max_tokens must be positive");
  require(alt_freq_max > 0, "alt_freq_max must be positive");
  require(pair_percentile >= 0 && pair_percentile <= 100, "pair_percentile must be in [0, 100]");
  require(alt_min_chars > 0, "alt_min_chars must be positive");
  require(per_domain_url_cap > 0, "per_domain_url_cap must be positive");
  require(fetch_rate_per_host > 0, "fetch_rate_per_host must be positive");
  require(fetch_concurrency > 0, "fetch_concurrency must be positive");
  require(group_by == "host", "group_by must be \"host\"");
  require(fetch_timeout_ms > 0, "fetch_timeout_ms must be positive");
  require(fetch_max_bytes > 0, "fetch_max_bytes must be positive");
  require(embed_batch_size > 0, "embed_batch_size must be positive");
}

nlohmann::ordered_json PipelineConfig::to_json() const {
  nlohmann::ordered_json j;
  visit_fields(*this, [&](const char* key, const auto& value) { j[key] = value; });
  return j;
}

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  PipelineConfig cfg;
  std::set<std::string> known;
  visit_fields(cfg, [&](const char* key, auto& field) {
    known.insert(key);
    if (auto it = j.find(key); it != j.end()) read_field(*it, key, field);
  });
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace mmforge
