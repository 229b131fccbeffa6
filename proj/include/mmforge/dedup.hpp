#pragma once

#include <cstdint>
#include <vector>

#include "mmforge/types.hpp"

namespace mmforge::dedup {

// Greedy near-duplicate removal within one document. Candidates are visited
// by pixel count (descending, URL ascending on ties); an image is kept iff
// its Hamming distance to every already kept image exceeds max_distance.
// Returns kept indices in original order. Every image must carry a phash.
// Cost is O(k^2) in the number of images per document.
std::vector<std::size_t> intra_document_keep(const std::vector<CandidateImage>& images,
                                             int max_distance);
std::vector<CandidateImage> dedup_intra(const std::vector<CandidateImage>& images, int max_distance);

struct CrossDedupResult {
  std::vector<std::size_t> kept;  // indices into the input, ascending
  std::vector<PHash> removed_hashes;
  std::size_t rounds = 0;
};

// Sampled frequency dedup across documents: ceil(N / sample_size) rounds,
// each drawing min(sample_size, N) images without replacement; any phash
// seen more than dup_max times in a round's sample is removed everywhere.
CrossDedupResult cross_document_keep(const std::vector<PHash>& hashes, int sample_size,
                                     int dup_max, std::uint64_t seed);
std::vector<CandidateImage> dedup_cross(const std::vector<CandidateImage>& images, int sample_size,
                                        int dup_max, std::uint64_t seed);

}  // namespace mmforge::dedup
