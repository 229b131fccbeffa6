#include "mmforge/dedup.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "mmforge/phash.hpp"
#include "mmforge/rng.hpp"

namespace mmforge::dedup {
namespace {

PHash hash_of(const CandidateImage& im) {
  if (!im.phash) throw std::invalid_argument("image " + im.url + " has no phash");
  return *im.phash;
}

}  // namespace

std::vector<std::size_t> intra_document_keep(const std::vector<CandidateImage>& images,
                                             int max_distance) {
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (images[a].pixel_count() != images[b].pixel_count()) {
      return images[a].pixel_count() > images[b].pixel_count();
    }
    return images[a].url < images[b].url;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const PHash h = hash_of(images[idx]);
    const bool far = std::all_of(kept.begin(), kept.end(), [&](std::size_t k) {
      return phash::hamming(h, hash_of(images[k])) > max_distance;
    });
    if (far) kept.push_back(idx);
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::vector<CandidateImage> dedup_intra(const std::vector<CandidateImage>& images, int max_distance) {
  std::vector<CandidateImage> out;
  for (std::size_t i : intra_document_keep(images, max_distance)) out.push_back(images[i]);
  return out;
}

CrossDedupResult cross_document_keep(const std::vector<PHash>& hashes, int sample_size,
                                     int dup_max, std::uint64_t seed) {
  if (sample_size < 1) throw std::invalid_argument("sample_size must be >= 1");
  CrossDedupResult result;
  const std::size_t n = hashes.size();
  const auto s = static_cast<std::size_t>(sample_size);
  result.rounds = (n + s - 1) / s;
  Rng rng(seed);
  std::unordered_set<std::uint64_t> removed;
  for (std::size_t round = 0; round < result.rounds; ++round) {
    std::unordered_map<std::uint64_t, int> freq;
    for (std::size_t i : rng.sample_indices(n, s)) ++freq[hashes[i].bits];
    for (const auto& [bits, count] : freq) {
      if (count > dup_max) removed.insert(bits);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!removed.contains(hashes[i].bits)) result.kept.push_back(i);
  }
  for (std::uint64_t bits : removed) result.removed_hashes.push_back(PHash{bits});
  std::sort(result.removed_hashes.begin(), result.removed_hashes.end(),
            [](PHash a, PHash b) { return a.bits < b.bits; });
  return result;
}

std::vector<CandidateImage> dedup_cross(const std::vector<CandidateImage>& images, int sample_size,
                                        int dup_max, std::uint64_t seed) {
  std::vector<PHash> hashes;
  hashes.reserve(images.size());
  for (const auto& im : images) hashes.push_back(hash_of(im));
  std::vector<CandidateImage> out;
  for (std::size_t i : cross_document_keep(hashes, sample_size, dup_max, seed).kept) {
    out.push_back(images[i]);
  }
  return out;
}

}  // namespace mmforge::dedup
