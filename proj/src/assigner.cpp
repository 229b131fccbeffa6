#include "mmforge/assigner.hpp"

#include <algorithm>
#include <stdexcept>

#include "mmforge/lap.hpp"
#include "mmforge/unicode.hpp"

namespace mmforge::assigner {

double Assignment::total_similarity() const {
  double total = 0.0;
  for (const auto& p : pairs) total += p.sim;
  return total;
}

std::size_t CharacterCounter::count(std::string_view text) const {
  return unicode::scalar_count(text);
}

std::vector<std::size_t> prefilter_images(const scoring::SimilarityMatrix& m,
                                          const PipelineConfig& cfg) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < m.n_images(); ++i) {
    bool any = false;
    for (std::size_t s = 0; s < m.n_sentences() && !any; ++s) any = m.at(s, i) >= cfg.sim_min;
    if (any) kept.push_back(i);
  }
  return kept;
}

Assignment assign_images(const scoring::SimilarityMatrix& m) {
  Assignment a;
  const std::size_t n_s = m.n_sentences();
  const std::size_t n_i = m.n_images();
  if (n_i == 0 || n_s == 0) return a;
  if (n_i <= n_s) {
    lap::Matrix cost(n_i, n_s);
    for (std::size_t i = 0; i < n_i; ++i) {
      for (std::size_t s = 0; s < n_s; ++s) cost(i, s) = -m.at(s, i);
    }
    const auto sol = lap::solve_lap(cost);
    for (std::size_t i = 0; i < n_i; ++i) {
      const std::size_t s = sol.row_to_col[i];
      a.pairs.push_back(AssignedPair{i, s, m.at(s, i)});
    }
  } else {
    lap::Matrix cost(n_s, n_i);
    for (std::size_t s = 0; s < n_s; ++s) {
      for (std::size_t i = 0; i < n_i; ++i) cost(s, i) = -m.at(s, i);
    }
    const auto sol = lap::solve_lap(cost);
    for (std::size_t s = 0; s < n_s; ++s) {
      const std::size_t i = sol.row_to_col[s];
      a.pairs.push_back(AssignedPair{i, s, m.at(s, i)});
    }
    std::sort(a.pairs.begin(), a.pairs.end(),
              [](const AssignedPair& x, const AssignedPair& y) { return x.image_index < y.image_index; });
  }
  return a;
}

const char* to_string(SampleReject r) {
  switch (r) {
    case SampleReject::too_few_images: return "too_few_images";
    case SampleReject::too_many_images: return "too_many_images";
    case SampleReject::too_few_sentences: return "too_few_sentences";
    case SampleReject::too_many_sentences: return "too_many_sentences";
    case SampleReject::too_long: return "too_long";
    case SampleReject::sim_below_min: return "sim_below_min";
  }
  return "unknown";
}

BuildResult build_sample(const RawDocument& doc, const std::vector<CandidateImage>& images,
                         const Assignment& assignment, const TokenCounter& counter,
                         const PipelineConfig& cfg) {
  BuildResult r;
  std::vector<AssignedPair> kept;
  for (const auto& p : assignment.pairs) {
    if (p.image_index >= images.size() || p.sentence_index >= doc.sentences.size()) {
      throw std::invalid_argument("assignment does not belong to document " + doc.doc_id);
    }
    if (p.sim >= cfg.sim_min) {
      kept.push_back(p);
    } else {
      ++r.dropped_pairs;
    }
  }
  const auto n_images = static_cast<long long>(kept.size());
  const auto n_sentences = static_cast<long long>(doc.sentences.size());
  if (n_images < cfg.images_min) {
    r.reject = SampleReject::too_few_images;
  } else if (n_images > cfg.images_max) {
    r.reject = SampleReject::too_many_images;
  } else if (n_sentences < cfg.sentences_min) {
    r.reject = SampleReject::too_few_sentences;
  } else if (n_sentences > cfg.sentences_max) {
    r.reject = SampleReject::too_many_sentences;
  }
  if (r.reject) return r;

  InterleavedSample s;
  s.source_url = doc.source_url;
  std::string joined;
  for (const auto& sentence : doc.sentences) {
    s.text_list.push_back(sentence.text);
    joined += sentence.text;
  }
  if (counter.count(joined) > static_cast<std::size_t>(cfg.max_tokens)) {
    r.reject = SampleReject::too_long;
    return r;
  }
  for (const auto& p : kept) {
    const CandidateImage& im = images[p.image_index];
    if (!im.phash) throw std::invalid_argument("image " + im.url + " has no phash");
    s.image_info.push_back(ImageInfo{im.url, *im.phash, im.width_px, im.height_px,
                                     static_cast<int>(p.sentence_index), p.sim});
  }
  r.sample = std::move(s);
  return r;
}

}  // namespace mmforge::assigner
