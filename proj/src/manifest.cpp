#include "mmforge/manifest.hpp"

#include <cinttypes>
#include <cstdio>
#include <set>
#include <unordered_set>

namespace mmforge {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

const json& require(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ManifestError(std::string("missing key '") + key + "'");
  return *it;
}

std::string require_string(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_string()) throw ManifestError(std::string("key '") + key + "' must be a string");
  return v.get<std::string>();
}

long long require_int(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number_integer()) throw ManifestError(std::string("key '") + key + "' must be an integer");
  return v.get<long long>();
}

double require_number(const json& j, const char* key) {
  const json& v = require(j, key);
  if (!v.is_number()) throw ManifestError(std::string("key '") + key + "' must be a number");
  return v.get<double>();
}

RawImageRef ref_from_json(const json& j) {
  if (!j.is_object()) throw ManifestError("image entry must be an object");
  RawImageRef r;
  r.url = require_string(j, "url");
  if (auto it = j.find("alt"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ManifestError("key 'alt' must be a string or null");
    r.alt_text = it->get<std::string>();
  }
  const long long pos = require_int(j, "position");
  if (pos < 0) throw ManifestError("image position must be non-negative");
  r.position = static_cast<std::size_t>(pos);
  return r;
}

void ref_to_json(const RawImageRef& r, ordered_json& out) {
  out["url"] = r.url;
  out["alt"] = r.alt_text ? json(*r.alt_text) : json(nullptr);
  out["position"] = r.position;
}

void check_positions(const std::vector<RawImageRef>& refs) {
  for (std::size_t i = 1; i < refs.size(); ++i) {
    if (refs[i].position <= refs[i - 1].position) {
      throw ManifestError("image positions must strictly increase");
    }
  }
}

std::vector<Sentence> sentences_from_json(const json& arr) {
  if (!arr.is_array()) throw ManifestError("key 'sentences' must be an array");
  std::vector<Sentence> out;
  for (const auto& s : arr) {
    if (!s.is_string()) throw ManifestError("sentences must be strings");
    out.push_back(Sentence{out.size(), s.get<std::string>()});
  }
  return out;
}

ordered_json sentences_to_json(const std::vector<Sentence>& sentences) {
  ordered_json arr = ordered_json::array();
  for (const auto& s : sentences) arr.push_back(s.text);
  return arr;
}

}  // namespace

std::string PHash::hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, bits);
  return buf;
}

PHash PHash::from_hex(const std::string& hex) {
  if (hex.size() != 16) throw ManifestError("phash hex must be 16 chars");
  std::uint64_t v = 0;
  for (char c : hex) {
    v <<= 4;
    if (c >= '0' && c <= '9') {
      v |= static_cast<std::uint64_t>(c - '0');
    } else if (c >= 'a' && c <= 'f') {
      v |= static_cast<std::uint64_t>(c - 'a' + 10);
    } else {
      throw ManifestError("phash hex must be lowercase hex");
    }
  }
  return PHash{v};
}

std::vector<LineError> for_each_jsonl(
    const std::filesystem::path& path,
    const std::function<void(const nlohmann::json&, std::size_t)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  std::vector<LineError> errors;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      fn(json::parse(line), line_no);
    } catch (const std::exception& e) {
      errors.push_back(LineError{line_no, e.what()});
    }
  }
  if (in.bad()) throw ManifestError("read error on manifest " + path.string());
  return errors;
}

JsonlWriter::JsonlWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw ManifestError("cannot open output " + path.string());
}

void JsonlWriter::write(const nlohmann::ordered_json& record) {
  out_ << record.dump() << '\n';
  if (!out_) throw ManifestError("write failed on " + path_.string());
}

void JsonlWriter::close() {
  out_.close();
  if (out_.fail()) throw ManifestError("close failed on " + path_.string());
}

RawDocument document_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ManifestError("document must be a JSON object");
  RawDocument d;
  d.doc_id = require_string(j, "doc_id");
  d.source_url = require_string(j, "url");
  if (auto it = j.find("text"); it != j.end()) {
    if (!it->is_string()) throw ManifestError("key 'text' must be a string");
    d.text = it->get<std::string>();
  }
  if (auto it = j.find("sentences"); it != j.end()) {
    d.sentences = sentences_from_json(*it);
  } else if (!j.contains("text")) {
    throw ManifestError("document needs 'text' or 'sentences'");
  }
  const json& images = require(j, "images");
  if (!images.is_array()) throw ManifestError("key 'images' must be an array");
  for (const auto& im : images) d.image_refs.push_back(ref_from_json(im));
  check_positions(d.image_refs);
  return d;
}

nlohmann::ordered_json document_to_json(const RawDocument& d) {
  ordered_json j;
  j["doc_id"] = d.doc_id;
  j["url"] = d.source_url;
  if (d.sentences.empty()) {
    j["text"] = d.text;
  } else {
    j["sentences"] = sentences_to_json(d.sentences);
  }
  ordered_json images = ordered_json::array();
  for (const auto& r : d.image_refs) {
    ordered_json im;
    ref_to_json(r, im);
    images.push_back(std::move(im));
  }
  j["images"] = std::move(images);
  return j;
}

DocumentLoad load_documents(const std::filesystem::path& path) {
  DocumentLoad out;
  std::unordered_set<std::string> seen;
  out.errors = for_each_jsonl(path, [&](const json& j, std::size_t) {
    RawDocument d = document_from_json(j);
    if (!seen.insert(d.doc_id).second) throw ManifestError("duplicate doc_id '" + d.doc_id + "'");
    out.documents.push_back(std::move(d));
  });
  return out;
}

nlohmann::ordered_json staged_to_json(const StagedDocument& d) {
  ordered_json j;
  j["doc_id"] = d.doc_id;
  j["url"] = d.source_url;
  j["sentences"] = sentences_to_json(d.sentences);
  ordered_json images = ordered_json::array();
  for (const auto& si : d.images) {
    ordered_json im;
    ref_to_json(si.ref, im);
    im["digest"] = to_hex(si.image.content_digest);
    im["width"] = si.image.width_px;
    im["height"] = si.image.height_px;
    im["blob"] = si.blob;
    if (si.image.phash) im["phash"] = si.image.phash->hex();
    if (si.image.nsfw_score) im["nsfw_score"] = *si.image.nsfw_score;
    if (!si.sims.empty()) im["sims"] = si.sims;
    images.push_back(std::move(im));
  }
  j["images"] = std::move(images);
  return j;
}

StagedDocument staged_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ManifestError("document must be a JSON object");
  StagedDocument d;
  d.doc_id = require_string(j, "doc_id");
  d.source_url = require_string(j, "url");
  d.sentences = sentences_from_json(require(j, "sentences"));
  const json& images = require(j, "images");
  if (!images.is_array()) throw ManifestError("key 'images' must be an array");
  for (const auto& im : images) {
    StagedImage si;
    si.ref = ref_from_json(im);
    si.image.url = si.ref.url;
    si.image.content_digest = digest_from_hex(require_string(im, "digest"));
    si.image.width_px = static_cast<int>(require_int(im, "width"));
    si.image.height_px = static_cast<int>(require_int(im, "height"));
    si.blob = require_string(im, "blob");
    if (im.contains("phash")) si.image.phash = PHash::from_hex(require_string(im, "phash"));
    if (im.contains("nsfw_score")) si.image.nsfw_score = require_number(im, "nsfw_score");
    if (auto it = im.find("sims"); it != im.end()) {
      if (!it->is_array()) throw ManifestError("key 'sims' must be an array");
      for (const auto& v : *it) {
        if (!v.is_number()) throw ManifestError("sims must be numbers");
        si.sims.push_back(v.get<double>());
      }
      if (si.sims.size() != d.sentences.size()) {
        throw ManifestError("sims length must equal the sentence count");
      }
    }
    d.images.push_back(std::move(si));
  }
  return d;
}

StagedLoad load_staged(const std::filesystem::path& path) {
  StagedLoad out;
  out.errors = for_each_jsonl(path, [&](const json& j, std::size_t) {
    out.documents.push_back(staged_from_json(j));
  });
  return out;
}

nlohmann::ordered_json sample_to_json(const InterleavedSample& s) {
  ordered_json j;
  j["url"] = s.source_url;
  j["text_list"] = s.text_list;
  ordered_json info = ordered_json::array();
  for (const auto& im : s.image_info) {
    ordered_json r;
    r["url"] = im.url;
    r["phash"] = im.phash.hex();
    r["width"] = im.width_px;
    r["height"] = im.height_px;
    r["matched_text_index"] = im.matched_text_index;
    r["matched_sim"] = im.matched_sim;
    info.push_back(std::move(r));
  }
  j["image_info"] = std::move(info);
  return j;
}

InterleavedSample sample_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ManifestError("sample must be a JSON object");
  InterleavedSample s;
  s.source_url = require_string(j, "url");
  const json& texts = require(j, "text_list");
  if (!texts.is_array()) throw ManifestError("key 'text_list' must be an array");
  for (const auto& t : texts) {
    if (!t.is_string()) throw ManifestError("text_list entries must be strings");
    s.text_list.push_back(t.get<std::string>());
  }
  const json& info = require(j, "image_info");
  if (!info.is_array()) throw ManifestError("key 'image_info' must be an array");
  for (const auto& r : info) {
    ImageInfo im;
    im.url = require_string(r, "url");
    im.phash = PHash::from_hex(require_string(r, "phash"));
    im.width_px = static_cast<int>(require_int(r, "width"));
    im.height_px = static_cast<int>(require_int(r, "height"));
    im.matched_text_index = static_cast<int>(require_int(r, "matched_text_index"));
    im.matched_sim = require_number(r, "matched_sim");
    s.image_info.push_back(std::move(im));
  }
  return s;
}

void write_samples(const std::filesystem::path& path, const std::vector<InterleavedSample>& samples) {
  JsonlWriter w(path);
  for (const auto& s : samples) w.write(sample_to_json(s));
  w.close();
}

std::vector<InterleavedSample> load_samples(const std::filesystem::path& path) {
  std::vector<InterleavedSample> out;
  auto errors = for_each_jsonl(path, [&](const json& j, std::size_t) {
    out.push_back(sample_from_json(j));
  });
  if (!errors.empty()) {
    throw ManifestError(path.string() + ":" + std::to_string(errors.front().line) + ": " +
                        errors.front().message);
  }
  return out;
}

nlohmann::ordered_json pair_to_json(const AltPair& p) {
  ordered_json j;
  j["url"] = p.image.url;
  j["alt"] = p.alt_text;
  j["phash"] = p.image.phash ? p.image.phash->hex() : std::string();
  j["score_a"] = p.score_a;
  j["score_b"] = p.score_b;
  return j;
}

const char* to_string(Violation v) {
  switch (v) {
    case Violation::too_few_images: return "too_few_images";
    case Violation::too_many_images: return "too_many_images";
    case Violation::too_few_sentences: return "too_few_sentences";
    case Violation::too_many_sentences: return "too_many_sentences";
    case Violation::index_out_of_range: return "index_out_of_range";
    case Violation::duplicate_index: return "duplicate_index";
    case Violation::sim_below_min: return "sim_below_min";
  }
  return "unknown";
}

std::vector<Violation> validate_sample(const InterleavedSample& s, const PipelineConfig& cfg) {
  std::vector<Violation> out;
  const auto n_images = static_cast<long long>(s.image_info.size());
  const auto n_texts = static_cast<long long>(s.text_list.size());
  if (n_images < cfg.images_min) out.push_back(Violation::too_few_images);
  if (n_images > cfg.images_max) out.push_back(Violation::too_many_images);
  if (n_texts < cfg.sentences_min) out.push_back(Violation::too_few_sentences);
  if (n_texts > cfg.sentences_max) out.push_back(Violation::too_many_sentences);
  std::set<int> seen;
  bool out_of_range = false;
  bool duplicate = false;
  bool below = false;
  for (const auto& im : s.image_info) {
    if (im.matched_text_index < 0 || im.matched_text_index >= n_texts) out_of_range = true;
    if (!seen.insert(im.matched_text_index).second) duplicate = true;
    if (!(im.matched_sim >= cfg.sim_min)) below = true;
  }
  if (out_of_range) out.push_back(Violation::index_out_of_range);
  if (duplicate) out.push_back(Violation::duplicate_index);
  if (below) out.push_back(Violation::sim_below_min);
  return out;
}

}  // namespace mmforge
