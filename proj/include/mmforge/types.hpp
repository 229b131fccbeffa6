#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmforge/digest.hpp"

namespace mmforge {

struct Sentence {
  std::size_t index = 0;
  std::string text;

  bool operator==(const Sentence&) const = default;
};

struct RawImageRef {
  std::string url;
  std::optional<std::string> alt_text;
  std::size_t position = 0;

  bool operator==(const RawImageRef&) const = default;
};

// One crawled page. `text` holds the unsegmented body as read from the
// crawl manifest; `sentences` is filled by segmentation.
struct RawDocument {
  std::string doc_id;
  std::string source_url;
  std::string text;
  std::vector<Sentence> sentences;
  std::vector<RawImageRef> image_refs;

  bool operator==(const RawDocument&) const = default;
};

struct PHash {
  std::uint64_t bits = 0;

  bool operator==(const PHash&) const = default;

  // 16-char lowercase hex.
  std::string hex() const;
  static PHash from_hex(const std::string& hex);
};

struct CandidateImage {
  std::string url;
  Digest256 content_digest{};
  int width_px = 0;
  int height_px = 0;
  std::optional<PHash> phash;
  std::optional<double> nsfw_score;
  std::optional<std::vector<double>> embedding;

  long long pixel_count() const { return static_cast<long long>(width_px) * height_px; }

  bool operator==(const CandidateImage&) const = default;
};

struct ImageInfo {
  std::string url;
  PHash phash;
  int width_px = 0;
  int height_px = 0;
  int matched_text_index = 0;
  double matched_sim = 0.0;

  bool operator==(const ImageInfo&) const = default;
};

struct InterleavedSample {
  std::string source_url;
  std::vector<std::string> text_list;
  std::vector<ImageInfo> image_info;

  bool operator==(const InterleavedSample&) const = default;
};

struct AltPair {
  CandidateImage image;
  std::string alt_text;
  double score_a = 0.0;
  double score_b = 0.0;
};

}  // namespace mmforge
