#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmforge/config.hpp"
#include "mmforge/types.hpp"

namespace mmforge {

struct LineError {
  std::size_t line = 0;  // 1-based
  std::string message;
};

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calls `fn` for each non-blank line parsed as JSON. Lines that fail to
// parse, or for which `fn` throws, are recorded and skipped. An unreadable
// file throws ManifestError.
std::vector<LineError> for_each_jsonl(
    const std::filesystem::path& path,
    const std::function<void(const nlohmann::json&, std::size_t line)>& fn);

// Append-only line writer. Each record is serialized compactly.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);
  void write(const nlohmann::ordered_json& record);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// A document image after the fetch stage: the original reference plus
// what later stages learned about it. `blob` is the path of the image bytes
// relative to the manifest's directory.
struct StagedImage {
  RawImageRef ref;
  CandidateImage image;
  std::string blob;
  std::vector<double> sims;  // per sentence, filled by the score stage

  bool operator==(const StagedImage&) const = default;
};

struct StagedDocument {
  std::string doc_id;
  std::string source_url;
  std::vector<Sentence> sentences;
  std::vector<StagedImage> images;

  bool operator==(const StagedDocument&) const = default;
};

struct DocumentLoad {
  std::vector<RawDocument> documents;
  std::vector<LineError> errors;
};

// Crawl manifests ({"doc_id","url","text","images"}) and segmented
// manifests (with "sentences" instead of, or alongside, "text").
RawDocument document_from_json(const nlohmann::json& j);
nlohmann::ordered_json document_to_json(const RawDocument& d);
DocumentLoad load_documents(const std::filesystem::path& path);

nlohmann::ordered_json staged_to_json(const StagedDocument& d);
StagedDocument staged_from_json(const nlohmann::json& j);

struct StagedLoad {
  std::vector<StagedDocument> documents;
  std::vector<LineError> errors;
};
StagedLoad load_staged(const std::filesystem::path& path);

nlohmann::ordered_json sample_to_json(const InterleavedSample& s);
InterleavedSample sample_from_json(const nlohmann::json& j);
void write_samples(const std::filesystem::path& path, const std::vector<InterleavedSample>& samples);
std::vector<InterleavedSample> load_samples(const std::filesystem::path& path);

nlohmann::ordered_json pair_to_json(const AltPair& p);

enum class Violation {
  too_few_images,
  too_many_images,
  too_few_sentences,
  too_many_sentences,
  index_out_of_range,
  duplicate_index,
  sim_below_min,
};

const char* to_string(Violation v);

// Empty result means the sample is valid.
std::vector<Violation> validate_sample(const InterleavedSample& s, const PipelineConfig& cfg);

}  // namespace mmforge
