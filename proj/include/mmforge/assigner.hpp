#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "mmforge/config.hpp"
#include "mmforge/scoring.hpp"
#include "mmforge/types.hpp"

namespace mmforge::assigner {

struct AssignedPair {
  std::size_t image_index = 0;
  std::size_t sentence_index = 0;
  double sim = 0.0;

  bool operator==(const AssignedPair&) const = default;
};

// Pairs ordered by image index. Image and sentence indices are each distinct.
struct Assignment {
  std::vector<AssignedPair> pairs;

  double total_similarity() const;
};

class TokenCounter {
 public:
  virtual ~TokenCounter() = default;
  virtual std::size_t count(std::string_view text) const = 0;
};

// One token per Unicode scalar.
class CharacterCounter final : public TokenCounter {
 public:
  std::size_t count(std::string_view text) const override;
};

// Image columns whose best sentence similarity is at least cfg.sim_min.
std::vector<std::size_t> prefilter_images(const scoring::SimilarityMatrix& m,
                                          const PipelineConfig& cfg);

// Maximum-total-similarity injective matching. The smaller side is fully
// matched: every image when images <= sentences, otherwise every sentence.
Assignment assign_images(const scoring::SimilarityMatrix& m);

enum class SampleReject {
  too_few_images,
  too_many_images,
  too_few_sentences,
  too_many_sentences,
  too_long,
  sim_below_min,
};

const char* to_string(SampleReject r);

struct BuildResult {
  std::optional<InterleavedSample> sample;
  std::optional<SampleReject> reject;
  std::size_t dropped_pairs = 0;  // assigned pairs under cfg.sim_min
};

// `images[k]` is the image behind column k of the matrix the assignment
// came from. Sub-threshold pairs are dropped before the count gates run.
BuildResult build_sample(const RawDocument& doc, const std::vector<CandidateImage>& images,
                         const Assignment& assignment, const TokenCounter& counter,
                         const PipelineConfig& cfg);

}  // namespace mmforge::assigner
