#include "mmforge/scoring.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>

#include "httplib.h"
#include "json.hpp"
#include "mmforge/rng.hpp"

namespace mmforge::scoring {
namespace {

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

std::string cache_key(char kind, std::span<const std::uint8_t> bytes) {
  std::string key(1, kind);
  key += to_hex(sha256(bytes));
  return key;
}

void check_unit(const Embedding& e, std::size_t index) {
  double norm = 0.0;
  for (double v : e) norm += v * v;
  if (std::abs(std::sqrt(norm) - 1.0) > 1e-6) {
    throw ProviderError("provider returned a non-unit vector at index " + std::to_string(index));
  }
}

httplib::Result post_json(const std::string& base_url, int timeout_ms, const std::string& path,
                          const std::string& body) {
  httplib::Client client(base_url);
  client.set_connection_timeout(std::chrono::milliseconds(timeout_ms));
  client.set_read_timeout(std::chrono::milliseconds(timeout_ms));
  client.set_write_timeout(std::chrono::milliseconds(timeout_ms));
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    throw ProviderError("POST " + base_url + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw ProviderError("POST " + base_url + path + " returned HTTP " +
                        std::to_string(res->status) + ": " + res->body);
  }
  return res;
}

std::string images_body(std::span<const Bytes> images) {
  nlohmann::json j;
  j["images_b64"] = nlohmann::json::array();
  for (const auto& im : images) j["images_b64"].push_back(base64_encode(im));
  return j.dump();
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

Embedding StubEmbeddingProvider::embed_bytes(std::span<const std::uint8_t> bytes) const {
  std::vector<std::uint8_t> keyed(tag_.begin(), tag_.end());
  keyed.insert(keyed.end(), bytes.begin(), bytes.end());
  std::uint64_t state = leading_u64(sha256(keyed));
  Embedding v(dim_);
  double norm = 0.0;
  for (auto& x : v) {
    const std::uint64_t r = splitmix64_step(state);
    x = 2.0 * (static_cast<double>(r >> 11) * 0x1.0p-53) - 1.0;
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  return v;
}

std::vector<Embedding> StubEmbeddingProvider::embed_texts(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_bytes(as_bytes(t)));
  return out;
}

std::vector<Embedding> StubEmbeddingProvider::embed_images(std::span<const Bytes> images) {
  std::vector<Embedding> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(embed_bytes(im));
  return out;
}

double StubNsfwScorer::score_for(std::span<const std::uint8_t> bytes) {
  return static_cast<double>(leading_u64(sha256(bytes)) >> 11) * 0x1.0p-53;
}

std::vector<double> StubNsfwScorer::score_images(std::span<const Bytes> images) {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& im : images) out.push_back(score_for(im));
  return out;
}

CachingEmbeddingProvider::CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner,
                                                   std::size_t batch_size)
    : inner_(std::move(inner)), batch_size_(std::max<std::size_t>(1, batch_size)) {}

std::size_t CachingEmbeddingProvider::inner_calls() const {
  std::lock_guard lock(mu_);
  return inner_calls_;
}

template <class Item, class Call>
std::vector<Embedding> CachingEmbeddingProvider::cached(std::span<const Item> items, char kind,
                                                        Call&& call) {
  std::vector<std::string> keys;
  keys.reserve(items.size());
  std::vector<std::size_t> missing;
  std::vector<std::pair<std::size_t, std::size_t>> repeats;  // (index, first missing index)
  std::unordered_map<std::string, std::size_t> first_missing;
  std::vector<Embedding> out(items.size());
  {
    std::lock_guard lock(mu_);
    for (std::size_t i = 0; i < items.size(); ++i) {
      std::span<const std::uint8_t> bytes;
      if constexpr (std::is_same_v<Item, std::string>) {
        bytes = as_bytes(items[i]);
      } else {
        bytes = items[i];
      }
      keys.push_back(cache_key(kind, bytes));
      if (auto it = cache_.find(keys.back()); it != cache_.end()) {
        out[i] = it->second;
      } else if (auto [m, fresh] = first_missing.emplace(keys.back(), i); fresh) {
        missing.push_back(i);
      } else {
        repeats.emplace_back(i, m->second);
      }
    }
  }
  for (std::size_t start = 0; start < missing.size(); start += batch_size_) {
    const std::size_t end = std::min(missing.size(), start + batch_size_);
    std::vector<Item> batch;
    for (std::size_t k = start; k < end; ++k) batch.push_back(items[missing[k]]);
    std::vector<Embedding> got;
    try {
      got = call(std::span<const Item>(batch));
    } catch (const std::exception& e) {
      throw ProviderError("embedding batch " + std::to_string(start / batch_size_) + " (items " +
                          std::to_string(missing[start]) + ".." + std::to_string(missing[end - 1]) +
                          ") failed: " + e.what());
    }
    if (got.size() != batch.size()) {
      throw ProviderError("embedding batch " + std::to_string(start / batch_size_) +
                          " returned the wrong number of vectors");
    }
    std::lock_guard lock(mu_);
    ++inner_calls_;
    for (std::size_t k = start; k < end; ++k) {
      out[missing[k]] = got[k - start];
      cache_[keys[missing[k]]] = got[k - start];
    }
  }
  for (const auto& [i, first] : repeats) out[i] = out[first];
  return out;
}

std::vector<Embedding> CachingEmbeddingProvider::embed_texts(std::span<const std::string> texts) {
  return cached(texts, 't', [this](std::span<const std::string> b) { return inner_->embed_texts(b); });
}

std::vector<Embedding> CachingEmbeddingProvider::embed_images(std::span<const Bytes> images) {
  return cached(images, 'i', [this](std::span<const Bytes> b) { return inner_->embed_images(b); });
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string base_url, int timeout_ms)
    : base_url_(std::move(base_url)), timeout_ms_(timeout_ms) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::size_t HttpEmbeddingProvider::dim() const {
  std::lock_guard lock(mu_);
  if (dim_ == 0) {
    httplib::Client client(base_url_);
    client.set_connection_timeout(std::chrono::milliseconds(timeout_ms_));
    client.set_read_timeout(std::chrono::milliseconds(timeout_ms_));
    auto res = client.Get("/healthz");
    if (!res || res->status != 200) throw ProviderError("embedding service at " + base_url_ + " is unavailable");
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("dim") || !j["dim"].is_number_unsigned()) {
      throw ProviderError("malformed /healthz response from " + base_url_);
    }
    dim_ = j["dim"].get<std::size_t>();
  }
  return dim_;
}

std::vector<Embedding> HttpEmbeddingProvider::post_embed(const std::string& path,
                                                         const std::string& body,
                                                         std::size_t expected) {
  auto res = post_json(base_url_, timeout_ms_, path, body);
  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("embeddings") || !j["embeddings"].is_array() ||
      !j.contains("dim")) {
    throw ProviderError("malformed response from " + base_url_ + path);
  }
  const auto dim = j["dim"].get<std::size_t>();
  std::vector<Embedding> out;
  for (const auto& row : j["embeddings"]) {
    Embedding e = row.get<Embedding>();
    if (e.size() != dim) throw ProviderError("embedding dimension mismatch from " + base_url_ + path);
    check_unit(e, out.size());
    out.push_back(std::move(e));
  }
  if (out.size() != expected) {
    throw ProviderError("service returned " + std::to_string(out.size()) + " vectors for " +
                        std::to_string(expected) + " inputs");
  }
  {
    std::lock_guard lock(mu_);
    dim_ = dim;
  }
  return out;
}

std::vector<Embedding> HttpEmbeddingProvider::embed_texts(std::span<const std::string> texts) {
  nlohmann::json j;
  j["texts"] = nlohmann::json::array();
  for (const auto& t : texts) j["texts"].push_back(t);
  return post_embed("/v1/embed/text", j.dump(), texts.size());
}

std::vector<Embedding> HttpEmbeddingProvider::embed_images(std::span<const Bytes> images) {
  return post_embed("/v1/embed/image", images_body(images), images.size());
}

std::vector<double> HttpNsfwScorer::score_images(std::span<const Bytes> images) {
  auto res = post_json(base_url_, timeout_ms_, "/v1/score/nsfw", images_body(images));
  const auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.contains("scores") || !j["scores"].is_array()) {
    throw ProviderError("malformed response from " + base_url_ + "/v1/score/nsfw");
  }
  auto scores = j["scores"].get<std::vector<double>>();
  if (scores.size() != images.size()) throw ProviderError("nsfw service returned the wrong number of scores");
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw ProviderError("nsfw score out of [0, 1]");
  }
  return scores;
}

SimilarityMatrix SimilarityMatrix::select_images(const std::vector<std::size_t>& image_indices) const {
  SimilarityMatrix out(n_sentences(), image_indices.size());
  for (std::size_t s = 0; s < n_sentences(); ++s) {
    for (std::size_t k = 0; k < image_indices.size(); ++k) out.at(s, k) = at(s, image_indices[k]);
  }
  return out;
}

double cosine(const Embedding& a, const Embedding& b) {
  if (a.size() != b.size()) throw std::invalid_argument("cosine: dimension mismatch");
  double dot = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) dot += a[k] * b[k];
  return std::clamp(dot, -1.0, 1.0);
}

void attach_image_embeddings(std::vector<CandidateImage>& images, std::span<const Bytes> bytes,
                             EmbeddingProvider& provider) {
  if (images.size() != bytes.size()) throw std::invalid_argument("one byte buffer per image required");
  auto vecs = provider.embed_images(bytes);
  for (std::size_t i = 0; i < images.size(); ++i) images[i].embedding = std::move(vecs[i]);
}

SimilarityMatrix similarity_matrix(const std::vector<Sentence>& sentences,
                                   const std::vector<CandidateImage>& images,
                                   EmbeddingProvider& provider) {
  std::vector<std::string> texts;
  texts.reserve(sentences.size());
  for (const auto& s : sentences) texts.push_back(s.text);
  const std::vector<Embedding> text_vecs = provider.embed_texts(texts);
  SimilarityMatrix m(sentences.size(), images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].embedding) throw std::invalid_argument("image " + images[i].url + " has no embedding");
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      m.at(s, i) = cosine(text_vecs[s], *images[i].embedding);
    }
  }
  return m;
}

NsfwResult nsfw_filter(std::vector<CandidateImage>& images, std::span<const Bytes> bytes,
                       NsfwScorer& scorer, const PipelineConfig& cfg) {
  if (images.size() != bytes.size()) throw std::invalid_argument("one byte buffer per image required");
  NsfwResult r;
  if (images.empty()) return r;
  r.scores = scorer.score_images(bytes);
  if (r.scores.size() != images.size()) throw ProviderError("nsfw scorer returned the wrong number of scores");
  for (std::size_t i = 0; i < images.size(); ++i) {
    images[i].nsfw_score = r.scores[i];
    if (r.scores[i] < cfg.nsfw_reject_min) r.kept.push_back(i);
  }
  return r;
}

double percentile_threshold(std::vector<double> scores, int p) {
  if (scores.empty()) throw std::invalid_argument("percentile of an empty score list");
  if (p < 0 || p > 100) throw std::invalid_argument("percentile must be in [0, 100]");
  std::sort(scores.begin(), scores.end());
  const std::size_t n = scores.size();
  const std::size_t rank = (static_cast<std::size_t>(p) * n + 99) / 100;  // ceil(p * n / 100)
  const std::size_t index = rank == 0 ? 0 : std::min(rank - 1, n - 1);
  return scores[index];
}

}  // namespace mmforge::scoring
