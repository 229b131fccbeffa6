#include "mmforge/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "mmforge/assigner.hpp"
#include "mmforge/dedup.hpp"
#include "mmforge/digest.hpp"
#include "mmforge/fetcher.hpp"
#include "mmforge/image_io.hpp"
#include "mmforge/manifest.hpp"
#include "mmforge/pairs.hpp"
#include "mmforge/phash.hpp"
#include "mmforge/rng.hpp"
#include "mmforge/segmenter.hpp"
#include "mmforge/unicode.hpp"

namespace mmforge::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kBlobDir = "blobs";

scoring::Bytes read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return scoring::Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string file_digest(const fs::path& path) { return to_hex(sha256(read_bytes(path))); }

std::string config_digest(const PipelineConfig& cfg) { return to_hex(sha256(cfg.to_json().dump())); }

bool uses_providers(Stage s) { return s == Stage::score || s == Stage::pairs; }

// Runs fn(i) for i in [0, n) on a small thread pool; the first exception
// is rethrown after all workers finish.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers =
      std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < workers; ++t) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

// Blob paths are stored relative to their manifest's directory.
std::string rebase_blob(const std::string& blob, const fs::path& from_dir, const fs::path& to_dir) {
  const fs::path abs = fs::absolute(from_dir / blob).lexically_normal();
  return abs.lexically_relative(fs::absolute(to_dir).lexically_normal()).generic_string();
}

void log_line_errors(const fs::path& input, const std::vector<LineError>& errors) {
  for (const auto& e : errors) spdlog::warn("{}:{}: skipped malformed record: {}", input.string(), e.line, e.message);
}

FunnelReport segment_stage(const StageRequest& rq, const fs::path& tmp) {
  FunnelReport f;
  f.stage = "segment";
  FunnelCounts docs;
  auto load = load_documents(rq.input);
  log_line_errors(rq.input, load.errors);
  docs.input_count = load.documents.size() + load.errors.size();
  docs.reject("malformed", load.errors.size());
  JsonlWriter w(tmp);
  for (auto& d : load.documents) {
    f.counts.input_count += d.image_refs.size();
    std::vector<Sentence> sentences;
    if (!d.text.empty()) {
      sentences = segmenter::split_sentences(d.text);
    } else {
      for (const auto& s : d.sentences) {
        std::string t = unicode::trim(s.text);
        if (!t.empty()) sentences.push_back(Sentence{sentences.size(), std::move(t)});
      }
    }
    if (sentences.empty()) {
      docs.reject("no_sentences");
      f.counts.reject("document_rejected", d.image_refs.size());
      continue;
    }
    RawDocument out{d.doc_id, d.source_url, "", std::move(sentences), d.image_refs};
    w.write(document_to_json(out));
    ++docs.output_count;
    f.counts.output_count += d.image_refs.size();
  }
  w.close();
  f.documents = docs;
  return f;
}

FunnelReport fetch_stage(const StageRequest& rq, const fs::path& tmp) {
  FunnelReport f;
  f.stage = "fetch";
  FunnelCounts docs;
  const PipelineConfig& cfg = rq.config;
  auto load = load_documents(rq.input);
  log_line_errors(rq.input, load.errors);
  docs.input_count = load.documents.size() + load.errors.size();
  docs.reject("malformed", load.errors.size());

  const auto policy = fetcher::FetchPolicy::from_config(cfg);
  std::vector<std::string> unique_urls;
  std::unordered_map<std::string, std::size_t> slot_of;
  // Per reference: a filter reject, or the slot of its unique URL.
  struct RefState {
    std::optional<fetcher::Reject> reject;
    std::size_t slot = 0;
  };
  std::vector<std::vector<RefState>> states(load.documents.size());
  for (std::size_t d = 0; d < load.documents.size(); ++d) {
    for (const auto& ref : load.documents[d].image_refs) {
      RefState st;
      st.reject = fetcher::filter_url(ref.url, policy);
      if (!st.reject) {
        auto [it, inserted] = slot_of.emplace(ref.url, unique_urls.size());
        if (inserted) unique_urls.push_back(ref.url);
        st.slot = it->second;
      }
      states[d].push_back(st);
    }
  }

  const auto kept = fetcher::downsample_domains(unique_urls, cfg.per_domain_url_cap,
                                                derive_seed(cfg.rng_seed, "fetch"));
  std::vector<bool> capped(unique_urls.size(), true);
  std::vector<std::string> to_fetch;
  std::vector<std::size_t> fetch_index(unique_urls.size(), 0);
  for (std::size_t k : kept) {
    capped[k] = false;
    fetch_index[k] = to_fetch.size();
    to_fetch.push_back(unique_urls[k]);
  }
  spdlog::info("fetch: {} unique URLs, {} after per-host cap", unique_urls.size(), to_fetch.size());

  auto results = fetcher::Fetcher(policy, cfg).fetch_all(to_fetch);

  const fs::path out_dir = rq.output.parent_path().empty() ? fs::path(".") : rq.output.parent_path();
  fs::create_directories(out_dir / kBlobDir);
  std::vector<std::string> blob_of(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].image) continue;
    const auto format = sniff_format(results[i].bytes);
    const std::string name = to_hex(results[i].image->content_digest) +
                             (format == ImageFormat::png ? ".png" : ".jpg");
    blob_of[i] = std::string(kBlobDir) + "/" + name;
    const fs::path target = out_dir / blob_of[i];
    if (!fs::exists(target)) {
      const fs::path part = target.string() + ".part";
      {
        std::ofstream out(part, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(results[i].bytes.data()),
                  static_cast<std::streamsize>(results[i].bytes.size()));
        if (!out) throw std::runtime_error("cannot write blob " + part.string());
      }
      fs::rename(part, target);
    }
  }

  JsonlWriter w(tmp);
  for (std::size_t d = 0; d < load.documents.size(); ++d) {
    const auto& doc = load.documents[d];
    StagedDocument out{doc.doc_id, doc.source_url, doc.sentences, {}};
    for (std::size_t r = 0; r < doc.image_refs.size(); ++r) {
      ++f.counts.input_count;
      const RefState& st = states[d][r];
      if (st.reject) {
        f.counts.reject(fetcher::to_string(*st.reject));
        continue;
      }
      if (capped[st.slot]) {
        f.counts.reject(fetcher::to_string(fetcher::Reject::domain_cap));
        continue;
      }
      const auto& res = results[fetch_index[st.slot]];
      if (!res.image) {
        f.counts.reject(fetcher::to_string(res.reject.value_or(fetcher::Reject::network_error)));
        continue;
      }
      StagedImage si;
      si.ref = doc.image_refs[r];
      si.image = *res.image;
      si.blob = blob_of[fetch_index[st.slot]];
      out.images.push_back(std::move(si));
      ++f.counts.output_count;
    }
    w.write(staged_to_json(out));
    ++docs.output_count;
  }
  w.close();
  f.documents = docs;
  return f;
}

FunnelReport dedup_stage(const StageRequest& rq, const fs::path& tmp) {
  FunnelReport f;
  f.stage = "dedup";
  FunnelCounts docs;
  const PipelineConfig& cfg = rq.config;
  auto load = load_staged(rq.input);
  log_line_errors(rq.input, load.errors);
  docs.input_count = load.documents.size() + load.errors.size();
  docs.reject("malformed", load.errors.size());
  const fs::path in_dir = rq.input.parent_path();
  const fs::path out_dir = rq.output.parent_path();

  // Hash each distinct blob once.
  std::vector<std::string> blobs;
  std::unordered_map<std::string, std::size_t> blob_slot;
  for (const auto& d : load.documents) {
    for (const auto& im : d.images) {
      if (blob_slot.emplace(im.blob, blobs.size()).second) blobs.push_back(im.blob);
    }
  }
  std::vector<std::optional<PHash>> hashes(blobs.size());
  parallel_for(blobs.size(), [&](std::size_t i) {
    try {
      hashes[i] = phash::phash64(decode_image(read_bytes(in_dir / blobs[i])));
    } catch (const DecodeError& e) {
      spdlog::warn("dedup: cannot hash {}: {}", blobs[i], e.what());
    }
  });

  std::vector<StagedDocument> stage_docs;
  for (auto& d : load.documents) {
    f.counts.input_count += d.images.size();
    std::vector<StagedImage> hashed;
    for (auto& im : d.images) {
      const auto& h = hashes[blob_slot.at(im.blob)];
      if (!h) {
        f.counts.reject("undecodable");
        continue;
      }
      im.image.phash = *h;
      hashed.push_back(std::move(im));
    }
    std::vector<CandidateImage> cands;
    for (const auto& im : hashed) cands.push_back(im.image);
    const auto keep = dedup::intra_document_keep(cands, cfg.hamming_intra_max);
    f.counts.reject("intra_duplicate", hashed.size() - keep.size());
    StagedDocument out{d.doc_id, d.source_url, d.sentences, {}};
    for (std::size_t k : keep) out.images.push_back(std::move(hashed[k]));
    stage_docs.push_back(std::move(out));
  }

  std::vector<PHash> all;
  for (const auto& d : stage_docs) {
    for (const auto& im : d.images) all.push_back(*im.image.phash);
  }
  const auto cross = dedup::cross_document_keep(all, cfg.cross_sample_size, cfg.cross_dup_max,
                                                derive_seed(cfg.rng_seed, "dedup"));
  std::vector<bool> keep_flat(all.size(), false);
  for (std::size_t k : cross.kept) keep_flat[k] = true;
  f.counts.reject("cross_duplicate", all.size() - cross.kept.size());

  JsonlWriter w(tmp);
  std::size_t flat = 0;
  for (auto& d : stage_docs) {
    std::vector<StagedImage> kept;
    for (auto& im : d.images) {
      if (keep_flat[flat++]) {
        im.blob = rebase_blob(im.blob, in_dir, out_dir);
        kept.push_back(std::move(im));
      }
    }
    d.images = std::move(kept);
    f.counts.output_count += d.images.size();
    w.write(staged_to_json(d));
    ++docs.output_count;
  }
  w.close();
  f.documents = docs;
  return f;
}

FunnelReport score_stage(const StageRequest& rq, const fs::path& tmp) {
  FunnelReport f;
  f.stage = "score";
  FunnelCounts docs;
  const PipelineConfig& cfg = rq.config;
  if (!rq.providers.primary || !rq.providers.nsfw) throw std::runtime_error("scoring providers not configured");
  auto load = load_staged(rq.input);
  log_line_errors(rq.input, load.errors);
  docs.input_count = load.documents.size() + load.errors.size();
  docs.reject("malformed", load.errors.size());
  const fs::path in_dir = rq.input.parent_path();
  const fs::path out_dir = rq.output.parent_path();

  std::vector<StagedDocument> out(load.documents.size());
  std::vector<std::size_t> nsfw_rejects(load.documents.size(), 0);
  parallel_for(load.documents.size(), [&](std::size_t d) {
    const auto& doc = load.documents[d];
    std::vector<CandidateImage> images;
    std::vector<scoring::Bytes> bytes;
    for (const auto& im : doc.images) {
      images.push_back(im.image);
      bytes.push_back(read_bytes(in_dir / im.blob));
    }
    const auto nsfw = scoring::nsfw_filter(images, bytes, *rq.providers.nsfw, cfg);
    nsfw_rejects[d] = images.size() - nsfw.kept.size();
    std::vector<CandidateImage> kept;
    std::vector<scoring::Bytes> kept_bytes;
    for (std::size_t k : nsfw.kept) {
      kept.push_back(images[k]);
      kept_bytes.push_back(std::move(bytes[k]));
    }
    StagedDocument sd{doc.doc_id, doc.source_url, doc.sentences, {}};
    if (!kept.empty()) {
      scoring::attach_image_embeddings(kept, kept_bytes, *rq.providers.primary);
      const auto m = scoring::similarity_matrix(doc.sentences, kept, *rq.providers.primary);
      for (std::size_t k = 0; k < kept.size(); ++k) {
        StagedImage si = doc.images[nsfw.kept[k]];
        si.image.nsfw_score = kept[k].nsfw_score;
        si.blob = rebase_blob(si.blob, in_dir, out_dir);
        for (std::size_t s = 0; s < doc.sentences.size(); ++s) si.sims.push_back(m.at(s, k));
        sd.images.push_back(std::move(si));
      }
    }
    out[d] = std::move(sd);
  });

  JsonlWriter w(tmp);
  for (std::size_t d = 0; d < out.size(); ++d) {
    f.counts.input_count += load.documents[d].images.size();
    f.counts.reject("nsfw", nsfw_rejects[d]);
    f.counts.output_count += out[d].images.size();
    w.write(staged_to_json(out[d]));
    ++docs.output_count;
  }
  w.close();
  f.documents = docs;
  return f;
}

bool contains_listed_word(const StagedDocument& d, const std::vector<std::string>& words) {
  for (const auto& s : d.sentences) {
    for (const auto& w : words) {
      if (!w.empty() && s.text.find(w) != std::string::npos) return true;
    }
  }
  return false;
}

FunnelReport assign_stage(const StageRequest& rq, const fs::path& tmp) {
  FunnelReport f;
  f.stage = "assign";
  FunnelCounts docs;
  const PipelineConfig& cfg = rq.config;
  auto load = load_staged(rq.input);
  log_line_errors(rq.input, load.errors);
  docs.input_count = load.documents.size() + load.errors.size();
  docs.reject("malformed", load.errors.size());

  struct DocOutcome {
    std::optional<InterleavedSample> sample;
    std::string doc_reject;
    std::map<std::string, std::size_t> image_rejects;
    std::size_t images_out = 0;
  };
  std::vector<DocOutcome> outcomes(load.documents.size());
  const assigner::CharacterCounter counter;
  parallel_for(load.documents.size(), [&](std::size_t d) {
    const auto& doc = load.documents[d];
    DocOutcome& o = outcomes[d];
    if (contains_listed_word(doc, cfg.nsfw_wordlist)) {
      o.doc_reject = "harmful_text";
      if (!doc.images.empty()) o.image_rejects["harmful_text"] = doc.images.size();
      return;
    }
    scoring::SimilarityMatrix m(doc.sentences.size(), doc.images.size());
    for (std::size_t i = 0; i < doc.images.size(); ++i) {
      if (doc.images[i].sims.size() != doc.sentences.size()) {
        throw std::runtime_error("document " + doc.doc_id + " has images without similarity scores");
      }
      for (std::size_t s = 0; s < doc.sentences.size(); ++s) m.at(s, i) = doc.images[i].sims[s];
    }
    const auto kept = assigner::prefilter_images(m, cfg);
    if (doc.images.size() > kept.size()) o.image_rejects["below_sim_min"] = doc.images.size() - kept.size();
    const auto sub = m.select_images(kept);
    const auto assignment = assigner::assign_images(sub);
    if (kept.size() > assignment.pairs.size()) o.image_rejects["unassigned"] = kept.size() - assignment.pairs.size();

    std::vector<CandidateImage> images;
    for (std::size_t k : kept) images.push_back(doc.images[k].image);
    RawDocument raw{doc.doc_id, doc.source_url, "", doc.sentences, {}};
    auto built = assigner::build_sample(raw, images, assignment, counter, cfg);
    if (built.dropped_pairs > 0) o.image_rejects["pair_below_min"] = built.dropped_pairs;
    if (!built.sample) {
      o.doc_reject = assigner::to_string(*built.reject);
      const std::size_t remaining = assignment.pairs.size() - built.dropped_pairs;
      if (remaining > 0) o.image_rejects[o.doc_reject] += remaining;
      return;
    }
    o.images_out = built.sample->image_info.size();
    o.sample = std::move(built.sample);
  });

  std::vector<std::pair<std::string, InterleavedSample>> samples;
  for (std::size_t d = 0; d < outcomes.size(); ++d) {
    auto& o = outcomes[d];
    f.counts.input_count += load.documents[d].images.size();
    for (const auto& [reason, n] : o.image_rejects) f.counts.reject(reason, n);
    f.counts.output_count += o.images_out;
    if (o.sample) {
      samples.emplace_back(load.documents[d].doc_id, std::move(*o.sample));
      ++docs.output_count;
    } else {
      docs.reject(o.doc_reject);
    }
  }
  std::stable_sort(samples.begin(), samples.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  JsonlWriter w(tmp);
  for (const auto& [_, s] : samples) w.write(sample_to_json(s));
  w.close();
  f.documents = docs;
  return f;
}

FunnelReport pairs_stage(const StageRequest& rq, const fs::path& tmp) {
  FunnelReport f;
  f.stage = "pairs";
  if (!rq.providers.primary || !rq.providers.secondary) throw std::runtime_error("pair scorers not configured");
  auto load = load_staged(rq.input);
  log_line_errors(rq.input, load.errors);
  const fs::path in_dir = rq.input.parent_path();
  std::vector<pairs::AltCandidate> candidates;
  for (const auto& d : load.documents) {
    for (const auto& im : d.images) {
      candidates.push_back(pairs::AltCandidate{im.image, im.ref.alt_text, read_bytes(in_dir / im.blob)});
    }
  }
  auto result = pairs::extract_pairs(candidates, pairs::AltFilterTables::from_config(rq.config),
                                     *rq.providers.primary, *rq.providers.secondary, rq.config);
  for (const auto& warning : result.warnings) spdlog::warn("pairs: {}", warning);
  JsonlWriter w(tmp);
  for (const auto& p : result.pairs) w.write(pair_to_json(p));
  w.close();
  f.counts = result.funnel;
  f.warnings = result.warnings;
  return f;
}

FunnelReport rouge_stage(const StageRequest& rq, const fs::path& tmp) {
  FunnelReport f;
  f.stage = "rouge";
  f.unit = "rows";
  JsonlWriter w(tmp);
  double sum_p = 0.0;
  double sum_r = 0.0;
  double sum_f = 0.0;
  std::size_t rows = 0;
  std::size_t invalid = 0;
  const auto errors = for_each_jsonl(rq.input, [&](const json& j, std::size_t line) {
    if (!j.is_object() || !j.contains("candidate") || !j.contains("reference") ||
        !j["candidate"].is_string() || !j["reference"].is_string()) {
      throw std::runtime_error("row needs string 'candidate' and 'reference'");
    }
    rouge::RougeResult r;
    try {
      r = rouge::rouge_l(j["candidate"].get<std::string>(), j["reference"].get<std::string>(),
                         rq.rouge.mode, rq.rouge.beta);
    } catch (const std::invalid_argument& e) {
      spdlog::warn("{}:{}: {}", rq.input.string(), line, e.what());
      ++invalid;
      return;
    }
    ordered_json out;
    out["candidate"] = j["candidate"];
    out["reference"] = j["reference"];
    out["precision"] = r.precision;
    out["recall"] = r.recall;
    out["f"] = r.f;
    w.write(out);
    sum_p += r.precision;
    sum_r += r.recall;
    sum_f += r.f;
    ++rows;
  });
  log_line_errors(rq.input, errors);
  w.close();
  f.counts.input_count = rows + invalid + errors.size();
  f.counts.reject("malformed", errors.size());
  f.counts.reject("invalid", invalid);
  f.counts.output_count = rows;

  ordered_json summary;
  summary["rows"] = rows;
  summary["mode"] = rq.rouge.mode == rouge::TokenMode::character ? "character" : "whitespace";
  summary["beta"] = rq.rouge.beta;
  summary["mean_precision"] = rows ? sum_p / rows : 0.0;
  summary["mean_recall"] = rows ? sum_r / rows : 0.0;
  summary["mean_f"] = rows ? sum_f / rows : 0.0;
  std::ofstream s(rq.output.string() + ".summary.json", std::ios::binary | std::ios::trunc);
  s << summary.dump(2) << '\n';
  return f;
}

ordered_json read_meta(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto j = ordered_json::parse(ss.str(), nullptr, false);
  return j.is_discarded() ? ordered_json() : j;
}

ordered_json expected_meta(const StageRequest& rq) {
  ordered_json m;
  m["stage"] = to_string(rq.stage);
  m["input_digest"] = file_digest(rq.input);
  m["config_digest"] = config_digest(rq.config);
  m["providers"] = uses_providers(rq.stage) ? rq.providers.describe() : std::string();
  return m;
}

bool up_to_date(const StageRequest& rq) {
  if (!fs::exists(rq.input) || !fs::exists(rq.output) || !fs::exists(meta_path(rq.output)) ||
      !fs::exists(funnel_path(rq.output))) {
    return false;
  }
  const auto meta = read_meta(meta_path(rq.output));
  if (!meta.is_object()) return false;
  const auto expected = expected_meta(rq);
  for (const auto& [k, v] : expected.items()) {
    if (!meta.contains(k) || meta[k] != v) return false;
  }
  return meta.contains("output_digest") && meta["output_digest"] == file_digest(rq.output);
}

}  // namespace

const char* to_string(Stage s) {
  switch (s) {
    case Stage::segment: return "segment";
    case Stage::fetch: return "fetch";
    case Stage::dedup: return "dedup";
    case Stage::score: return "score";
    case Stage::assign: return "assign";
    case Stage::pairs: return "pairs";
    case Stage::rouge: return "rouge";
    case Stage::stats: return "stats";
  }
  return "unknown";
}

Stage parse_stage(const std::string& name) {
  for (Stage s : {Stage::segment, Stage::fetch, Stage::dedup, Stage::score, Stage::assign, Stage::pairs,
                  Stage::rouge, Stage::stats}) {
    if (name == to_string(s)) return s;
  }
  throw std::invalid_argument("unknown stage '" + name + "'");
}

std::string Providers::describe() const {
  return "primary=" + (primary ? primary->describe() : std::string("none")) +
         ";secondary=" + (secondary ? secondary->describe() : std::string("none")) +
         ";nsfw=" + (nsfw ? nsfw->describe() : std::string("none"));
}

Providers make_providers(const PipelineConfig& cfg, const std::optional<std::string>& endpoint,
                         const std::optional<std::string>& endpoint_b) {
  const auto batch = static_cast<std::size_t>(cfg.embed_batch_size);
  Providers p;
  if (endpoint) {
    p.primary = std::make_shared<scoring::CachingEmbeddingProvider>(
        std::make_shared<scoring::HttpEmbeddingProvider>(*endpoint), batch);
    p.nsfw = std::make_shared<scoring::HttpNsfwScorer>(*endpoint);
  } else {
    p.primary = std::make_shared<scoring::CachingEmbeddingProvider>(
        std::make_shared<scoring::StubEmbeddingProvider>(), batch);
    p.nsfw = std::make_shared<scoring::StubNsfwScorer>();
  }
  if (endpoint_b) {
    p.secondary = std::make_shared<scoring::CachingEmbeddingProvider>(
        std::make_shared<scoring::HttpEmbeddingProvider>(*endpoint_b), batch);
  } else {
    p.secondary = std::make_shared<scoring::CachingEmbeddingProvider>(
        std::make_shared<scoring::StubEmbeddingProvider>("score_b:"), batch);
  }
  return p;
}

fs::path funnel_path(const fs::path& output) { return output.string() + ".funnel.json"; }
fs::path meta_path(const fs::path& output) { return output.string() + ".meta.json"; }

FunnelReport run_stage(const StageRequest& rq) {
  try {
    if (rq.stage == Stage::stats) {
      if (!fs::is_directory(rq.input)) throw std::runtime_error("stats input must be a directory of funnel reports");
      const auto report = merge_funnels(rq.input);
      std::ofstream out(rq.output, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot write " + rq.output.string());
      out << report.json.dump(2) << '\n';
      if (!report.consistent) throw std::runtime_error("funnel totals do not telescope; see " + rq.output.string());
      FunnelReport f;
      f.stage = "stats";
      f.unit = "stages";
      return f;
    }
    if (!fs::exists(rq.input)) throw std::runtime_error("input " + rq.input.string() + " does not exist");
    const fs::path out_dir = rq.output.parent_path();
    if (!out_dir.empty()) fs::create_directories(out_dir);
    const fs::path tmp = rq.output.string() + ".tmp";

    FunnelReport f;
    switch (rq.stage) {
      case Stage::segment: f = segment_stage(rq, tmp); break;
      case Stage::fetch: f = fetch_stage(rq, tmp); break;
      case Stage::dedup: f = dedup_stage(rq, tmp); break;
      case Stage::score: f = score_stage(rq, tmp); break;
      case Stage::assign: f = assign_stage(rq, tmp); break;
      case Stage::pairs: f = pairs_stage(rq, tmp); break;
      case Stage::rouge: f = rouge_stage(rq, tmp); break;
      case Stage::stats: break;
    }
    if (!f.conserved()) throw std::logic_error("funnel conservation violated");
    fs::rename(tmp, rq.output);
    f.save(funnel_path(rq.output));
    auto meta = expected_meta(rq);
    meta["output_digest"] = file_digest(rq.output);
    std::ofstream m(meta_path(rq.output), std::ios::binary | std::ios::trunc);
    m << meta.dump(2) << '\n';
    spdlog::info("{}: {} in, {} out ({})", f.stage, f.counts.input_count, f.counts.output_count, f.unit);
    return f;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(rq.stage, e.what());
  }
}

PipelineRun run_pipeline(const fs::path& documents, const fs::path& workdir, const PipelineConfig& cfg,
                         const Providers& providers) {
  cfg.validate();
  fs::create_directories(workdir);
  PipelineRun run;
  struct Step {
    Stage stage;
    fs::path input;
    const char* output;
  };
  const fs::path scored = workdir / "scored.jsonl";
  const std::vector<Step> steps = {
      {Stage::segment, documents, "segmented.jsonl"},
      {Stage::fetch, workdir / "segmented.jsonl", "fetched.jsonl"},
      {Stage::dedup, workdir / "fetched.jsonl", "deduped.jsonl"},
      {Stage::score, workdir / "deduped.jsonl", "scored.jsonl"},
      {Stage::assign, scored, "samples.jsonl"},
      {Stage::pairs, scored, "pairs.jsonl"},
  };
  for (const auto& step : steps) {
    StageRequest rq;
    rq.stage = step.stage;
    rq.input = step.input;
    rq.output = workdir / step.output;
    rq.config = cfg;
    rq.providers = providers;
    if (up_to_date(rq)) {
      spdlog::info("{}: up to date, skipping", to_string(step.stage));
      run.skipped.push_back(step.stage);
      continue;
    }
    run_stage(rq);
    run.executed.push_back(step.stage);
  }
  run.samples = workdir / "samples.jsonl";
  run.pairs = workdir / "pairs.jsonl";
  run.stats = workdir / "stats.json";
  StageRequest stats;
  stats.stage = Stage::stats;
  stats.input = workdir;
  stats.output = run.stats;
  stats.config = cfg;
  run_stage(stats);
  return run;
}

StatsReport merge_funnels(const fs::path& dir) {
  StatsReport out;
  std::map<std::string, FunnelReport> by_stage;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.ends_with(".funnel.json")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  ordered_json stages = ordered_json::array();
  ordered_json problems = ordered_json::array();
  for (const auto& file : files) {
    FunnelReport r = FunnelReport::load(file);
    if (!r.conserved()) {
      problems.push_back("stage " + r.stage + " does not conserve its counts");
      out.consistent = false;
    }
    if (!by_stage.emplace(r.stage, r).second) {
      problems.push_back("more than one funnel report for stage " + r.stage);
      out.consistent = false;
    }
  }
  const std::vector<std::string> order = {"segment", "fetch", "dedup", "score", "assign", "pairs", "rouge"};
  for (const auto& name : order) {
    if (auto it = by_stage.find(name); it != by_stage.end()) stages.push_back(it->second.to_json());
  }
  const std::vector<std::pair<std::string, std::string>> edges = {
      {"segment", "fetch"}, {"fetch", "dedup"}, {"dedup", "score"}, {"score", "assign"}, {"score", "pairs"}};
  ordered_json links = ordered_json::array();
  for (const auto& [from, to] : edges) {
    auto a = by_stage.find(from);
    auto b = by_stage.find(to);
    if (a == by_stage.end() || b == by_stage.end()) continue;
    ordered_json link;
    link["from"] = from;
    link["to"] = to;
    link["images_out"] = a->second.counts.output_count;
    link["images_in"] = b->second.counts.input_count;
    bool ok = a->second.counts.output_count == b->second.counts.input_count;
    if (a->second.documents && b->second.documents) {
      link["documents_out"] = a->second.documents->output_count;
      link["documents_in"] = b->second.documents->input_count;
      ok = ok && a->second.documents->output_count == b->second.documents->input_count;
    }
    link["ok"] = ok;
    if (!ok) {
      out.consistent = false;
      problems.push_back(from + " -> " + to + " counts do not telescope");
    }
    links.push_back(std::move(link));
  }
  out.json["stages"] = std::move(stages);
  out.json["links"] = std::move(links);
  out.json["consistent"] = out.consistent;
  out.json["problems"] = std::move(problems);
  return out;
}

}  // namespace mmforge::pipeline
