#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "mmforge/config.hpp"
#include "mmforge/digest.hpp"
#include "mmforge/lap.hpp"
#include "mmforge/types.hpp"

namespace mmforge::scoring {

using Bytes = std::vector<std::uint8_t>;
using Embedding = std::vector<double>;

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dim() const = 0;
  virtual std::vector<Embedding> embed_texts(std::span<const std::string> texts) = 0;
  virtual std::vector<Embedding> embed_images(std::span<const Bytes> images) = 0;
  // Identifies the provider in resume sidecars.
  virtual std::string describe() const = 0;
};

class NsfwScorer {
 public:
  virtual ~NsfwScorer() = default;
  virtual std::vector<double> score_images(std::span<const Bytes> images) = 0;
  virtual std::string describe() const = 0;
};

// Deterministic stand-in for a joint text/image encoder.
//
// For input bytes B the vector is derived as:
//   digest = SHA-256(tag || B)          tag is the provider's variant string
//   state  = first 8 digest bytes, big-endian
//   for k in [0, dim): x = splitmix64(state);  v[k] = 2 * (x >> 11) * 2^-53 - 1
//   v /= ||v||_2
// Text inputs use their UTF-8 bytes; images use the raw encoded file bytes.
class StubEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit StubEmbeddingProvider(std::string tag = "", std::size_t dim = 64)
      : tag_(std::move(tag)), dim_(dim) {}

  std::size_t dim() const override { return dim_; }
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) override;
  std::vector<Embedding> embed_images(std::span<const Bytes> images) override;
  std::string describe() const override { return "stub:" + tag_ + ":" + std::to_string(dim_); }

  Embedding embed_bytes(std::span<const std::uint8_t> bytes) const;

 private:
  std::string tag_;
  std::size_t dim_;
};

// score = (first 8 bytes of SHA-256(image), big-endian) >> 11, times 2^-53.
class StubNsfwScorer final : public NsfwScorer {
 public:
  std::vector<double> score_images(std::span<const Bytes> images) override;
  std::string describe() const override { return "stub-nsfw"; }

  static double score_for(std::span<const std::uint8_t> bytes);
};

// Batches calls to an inner provider and memoizes results by the SHA-256
// of the input bytes. Safe to share between threads.
class CachingEmbeddingProvider final : public EmbeddingProvider {
 public:
  CachingEmbeddingProvider(std::shared_ptr<EmbeddingProvider> inner, std::size_t batch_size);

  std::size_t dim() const override { return inner_->dim(); }
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) override;
  std::vector<Embedding> embed_images(std::span<const Bytes> images) override;
  std::string describe() const override { return inner_->describe(); }

  std::size_t inner_calls() const;

 private:
  template <class Item, class Call>
  std::vector<Embedding> cached(std::span<const Item> items, char kind, Call&& call);

  std::shared_ptr<EmbeddingProvider> inner_;
  std::size_t batch_size_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Embedding> cache_;
  std::size_t inner_calls_ = 0;
};

// Client for the embedding service HTTP contract:
//   POST {base}/v1/embed/text   {"texts": [str]}       -> {"dim", "embeddings"}
//   POST {base}/v1/embed/image  {"images_b64": [str]}  -> {"dim", "embeddings"}
//   POST {base}/v1/score/nsfw   {"images_b64": [str]}  -> {"scores"}
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string base_url, int timeout_ms = 30000);

  std::size_t dim() const override;
  std::vector<Embedding> embed_texts(std::span<const std::string> texts) override;
  std::vector<Embedding> embed_images(std::span<const Bytes> images) override;
  std::string describe() const override { return "http:" + base_url_; }

 private:
  std::vector<Embedding> post_embed(const std::string& path, const std::string& body,
                                    std::size_t expected);

  std::string base_url_;
  int timeout_ms_;
  mutable std::mutex mu_;
  mutable std::size_t dim_ = 0;
};

class HttpNsfwScorer final : public NsfwScorer {
 public:
  explicit HttpNsfwScorer(std::string base_url, int timeout_ms = 30000)
      : base_url_(std::move(base_url)), timeout_ms_(timeout_ms) {}

  std::vector<double> score_images(std::span<const Bytes> images) override;
  std::string describe() const override { return "http-nsfw:" + base_url_; }

 private:
  std::string base_url_;
  int timeout_ms_;
};

std::string base64_encode(std::span<const std::uint8_t> bytes);

// Rows are sentences, columns are images; entry (s, i) is the cosine
// similarity of sentence s and image i, clamped to [-1, 1].
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::size_t n_sentences, std::size_t n_images)
      : values_(n_sentences, n_images) {}

  std::size_t n_sentences() const { return values_.rows(); }
  std::size_t n_images() const { return values_.cols(); }
  double& at(std::size_t s, std::size_t i) { return values_(s, i); }
  double at(std::size_t s, std::size_t i) const { return values_(s, i); }
  const lap::Matrix& values() const { return values_; }

  // Sub-matrix over a subset of image columns, in the given order.
  SimilarityMatrix select_images(const std::vector<std::size_t>& image_indices) const;

 private:
  lap::Matrix values_;
};

double cosine(const Embedding& a, const Embedding& b);

// Embeds each image's bytes and stores the vector on the image.
void attach_image_embeddings(std::vector<CandidateImage>& images, std::span<const Bytes> bytes,
                             EmbeddingProvider& provider);

// Images must already carry embeddings.
SimilarityMatrix similarity_matrix(const std::vector<Sentence>& sentences,
                                   const std::vector<CandidateImage>& images,
                                   EmbeddingProvider& provider);

struct NsfwResult {
  std::vector<std::size_t> kept;  // ascending input indices
  std::vector<double> scores;     // one per input image
};

// Keeps images scoring strictly below cfg.nsfw_reject_min and records each
// score on its image.
NsfwResult nsfw_filter(std::vector<CandidateImage>& images, std::span<const Bytes> bytes,
                       NsfwScorer& scorer, const PipelineConfig& cfg);

// Nearest-rank percentile: ascending sort, element ceil(p/100 * n) - 1
// clamped into range. Callers keep scores strictly above it.
double percentile_threshold(std::vector<double> scores, int p);

}  // namespace mmforge::scoring
