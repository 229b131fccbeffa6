#include "fixtures.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "json.hpp"
#include "mmforge/config.hpp"
#include "mmforge/scoring.hpp"

namespace mmforge::testing {
namespace {

std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

void put_u32(Bytes& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "東京", "桜", "電車", "駅前", "公園", "料理", "写真家", "散歩", "季節", "友達",
      "新しい", "古い", "美しい", "静かな", "大きな", "小さな", "赤い", "青い", "白い", "黒い",
      "猫", "本屋", "喫茶店", "映画", "音楽", "学校", "先生", "子供", "家族", "旅行",
      "見る", "食べる", "歩く", "話す", "作る", "買う", "読む", "書く", "遊ぶ", "休む",
      "が", "を", "に", "で", "と", "は", "も", "から", "まで", "の",
      "カメラ", "ラーメン", "コーヒー", "ケーキ", "バス", "ホテル", "ニュース", "テレビ",
  };
  return words;
}

scoring::Embedding stub_embedding(std::string_view text) {
  scoring::StubEmbeddingProvider stub;
  return stub.embed_bytes(
      std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sentence(Rng& rng, int words) { return random_words(rng, words) + "。"; }

// A sentence whose stub embedding is close enough to the image's for the
// similarity gate.
std::string matching_sentence(Rng& rng, const scoring::Embedding& image, double min_sim) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    std::string s = sentence(rng, 4 + static_cast<int>(rng.below(5)));
    if (scoring::cosine(stub_embedding(s), image) >= min_sim) return s;
  }
  throw std::runtime_error("no matching sentence found");
}

}  // namespace

std::string random_words(Rng& rng, int words) {
  const auto& v = vocabulary();
  std::string out;
  for (int i = 0; i < words; ++i) out += v[rng.below(v.size())];
  return out;
}

Raster smooth_image(int width, int height, Rng& rng) {
  struct Wave {
    double fx, fy, phase, amp[3];
  };
  std::vector<Wave> waves(4 + rng.below(3));
  for (auto& w : waves) {
    w.fx = (rng.uniform01() * 2 - 1) * 3.0;
    w.fy = (rng.uniform01() * 2 - 1) * 3.0;
    w.phase = rng.uniform01() * 2 * std::numbers::pi;
    for (double& a : w.amp) a = 20 + rng.uniform01() * 40;
  }
  double base[3];
  for (double& b : base) b = 60 + rng.uniform01() * 130;
  // cos(a + b) = cos a cos b - sin a sin b, so each wave needs only
  // per-column and per-row tables.
  const std::size_t nw = waves.size();
  std::vector<double> cx(nw * width), sx(nw * width), cy(nw * height), sy(nw * height);
  for (std::size_t k = 0; k < nw; ++k) {
    for (int x = 0; x < width; ++x) {
      const double a = 2 * std::numbers::pi * waves[k].fx * x / width + waves[k].phase;
      cx[k * width + x] = std::cos(a);
      sx[k * width + x] = std::sin(a);
    }
    for (int y = 0; y < height; ++y) {
      const double b = 2 * std::numbers::pi * waves[k].fy * y / height;
      cy[k * height + y] = std::cos(b);
      sy[k * height + y] = std::sin(b);
    }
  }
  Raster r{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double acc[3] = {base[0], base[1], base[2]};
      for (std::size_t k = 0; k < nw; ++k) {
        const double wave = cx[k * width + x] * cy[k * height + y] - sx[k * width + x] * sy[k * height + y];
        for (int c = 0; c < 3; ++c) acc[c] += waves[k].amp[c] * wave;
      }
      std::uint8_t* p = r.pixel(x, y);
      for (int c = 0; c < 3; ++c) p[c] = clamp_byte(acc[c]);
    }
  }
  return r;
}

Raster noise_image(int width, int height, Rng& rng) {
  Raster r{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
  for (auto& b : r.rgb) b = static_cast<std::uint8_t>(rng.below(256));
  return r;
}

Raster box_downscale(const Raster& src, int factor) {
  const int w = src.width / factor;
  const int h = src.height / factor;
  Raster r{w, h, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        int acc = 0;
        for (int dy = 0; dy < factor; ++dy) {
          for (int dx = 0; dx < factor; ++dx) acc += src.pixel(x * factor + dx, y * factor + dy)[c];
        }
        r.pixel(x, y)[c] = clamp_byte(static_cast<double>(acc) / (factor * factor));
      }
    }
  }
  return r;
}

Raster solid_image(int width, int height, std::uint8_t value) {
  return Raster{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3, value)};
}

Bytes png_with_nonce(const Bytes& png, std::uint32_t nonce) {
  // IEND is always the final 12 bytes.
  if (png.size() < 20) throw std::invalid_argument("not a PNG");
  const std::size_t iend = png.size() - 12;
  std::string data = "nonce";
  data.push_back('\0');
  data += std::to_string(nonce);

  Bytes chunk;
  put_u32(chunk, static_cast<std::uint32_t>(data.size()));
  const std::size_t type_at = chunk.size();
  for (char c : std::string("tEXt")) chunk.push_back(static_cast<std::uint8_t>(c));
  for (char c : data) chunk.push_back(static_cast<std::uint8_t>(c));
  const auto crc = crc32(0L, chunk.data() + type_at, static_cast<uInt>(chunk.size() - type_at));
  put_u32(chunk, static_cast<std::uint32_t>(crc));

  Bytes out(png.begin(), png.begin() + static_cast<std::ptrdiff_t>(iend));
  out.insert(out.end(), chunk.begin(), chunk.end());
  out.insert(out.end(), png.begin() + static_cast<std::ptrdiff_t>(iend), png.end());
  return out;
}

Bytes png_with_nsfw(const Raster& raster, double limit, bool below) {
  const Bytes plain = encode_png(raster);
  for (std::uint32_t nonce = 0; nonce < 100000; ++nonce) {
    Bytes candidate = png_with_nonce(plain, nonce);
    const double s = scoring::StubNsfwScorer::score_for(candidate);
    if ((s < limit) == below) return candidate;
  }
  throw std::runtime_error("nonce search exhausted");
}

ImageServer::ImageServer() {
  server_.new_task_queue = [] { return new httplib::ThreadPool(64); };
  server_.Get(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
    Hit hit{req.get_header_value("Host"), req.path, std::chrono::steady_clock::now(), {}};
    const int now = ++in_flight_;
    int seen = max_in_flight_.load();
    while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
    }
    auto it = routes_.find(req.path);
    if (it == routes_.end()) {
      res.status = 404;
    } else {
      if (it->second.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(it->second.delay_ms));
      res.status = it->second.status;
      if (!it->second.body.empty()) res.set_content(it->second.body, it->second.content_type);
    }
    --in_flight_;
    hit.end = std::chrono::steady_clock::now();
    std::lock_guard lock(hits_mu_);
    hits_.push_back(std::move(hit));
  });
  port_ = server_.bind_to_any_port("0.0.0.0");
  if (port_ <= 0) throw std::runtime_error("cannot bind test server");
}

ImageServer::~ImageServer() { stop(); }

void ImageServer::add(const std::string& path, const Bytes& body, std::string content_type, int delay_ms) {
  routes_[path] = Route{200, std::move(content_type), std::string(body.begin(), body.end()), delay_ms};
}

void ImageServer::add_status(const std::string& path, int status) { routes_[path] = Route{status, "", "", 0}; }

void ImageServer::start() {
  thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
}

void ImageServer::stop() {
  if (thread_.joinable()) {
    server_.stop();
    thread_.join();
  }
}

std::string ImageServer::base(const std::string& host) const {
  return "http://" + host + ":" + std::to_string(port_);
}

std::vector<ImageServer::Hit> ImageServer::hits() const {
  std::lock_guard lock(hits_mu_);
  return hits_;
}

CorpusSummary write_corpus(const std::filesystem::path& dir, ImageServer& server, std::uint64_t seed,
                           int documents) {
  using nlohmann::ordered_json;
  const PipelineConfig defaults;
  const double nsfw_limit = defaults.nsfw_reject_min;
  const std::string base = server.base();
  Rng rng(seed);
  scoring::StubEmbeddingProvider stub;

  auto make_image = [&](int w, int h) { return smooth_image(w, h, rng); };
  auto planned_size = [&](bool large) {
    const int w = (large ? 340 : 180) + static_cast<int>(rng.below(160));
    const int h = std::clamp(static_cast<int>(w * (0.6 + rng.uniform01())), large ? 320 : 160, 2 * w - 1);
    return std::pair{w, h};
  };

  // Shared by more documents than the cross-document limit allows.
  const std::string ad_url = base + "/shared/banner.png";
  server.add("/shared/banner.png", png_with_nsfw(make_image(300, 250), nsfw_limit));

  std::filesystem::create_directories(dir);
  CorpusSummary summary;
  summary.documents = dir / "documents.jsonl";
  std::ofstream out(summary.documents, std::ios::binary | std::ios::trunc);
  int frequent_alt_budget = 12;

  for (int d = 0; d < documents; ++d) {
    const std::string tag = "d" + std::to_string(d);
    int sentence_count = 10 + static_cast<int>(rng.below(21));
    int planned = 2 + static_cast<int>(rng.below(3));
    int words_per_sentence = 5;
    if (d % 20 == 7) sentence_count = 5;
    if (d == 17) sentence_count = 120;
    if (d == 13) {
      sentence_count = 60;
      words_per_sentence = 50;
    }
    if (d % 25 == 3) planned = 1;

    std::vector<std::string> sentences;
    for (int s = 0; s < sentence_count; ++s) sentences.push_back(sentence(rng, words_per_sentence));

    ordered_json images = ordered_json::array();
    int position = 0;
    auto add_ref = [&](const std::string& url, const ordered_json& alt) {
      images.push_back(ordered_json{{"url", url}, {"alt", alt}, {"position", position}});
      position += 3;
      ++summary.image_refs;
    };

    const bool with_duplicate = rng.below(4) == 0;
    const auto slots = rng.sample_indices(sentences.size(), static_cast<std::size_t>(planned));
    for (int k = 0; k < planned; ++k) {
      const auto [w, h] = planned_size(with_duplicate && k == 0);
      const Raster raster = make_image(w, h);
      const Bytes png = png_with_nsfw(raster, nsfw_limit);
      const std::string path = "/img/" + tag + "_" + std::to_string(k) + ".png";
      server.add(path, png);
      const auto emb = stub.embed_bytes(png);
      sentences[slots[k]] = matching_sentence(rng, emb, 0.25);

      ordered_json alt;
      const auto roll = rng.below(20);
      if (frequent_alt_budget > 0 && k == 0 && d % 3 == 1) {
        alt = "商品画像";
        --frequent_alt_budget;
      } else if (roll < 10) {
        alt = random_words(rng, 3 + static_cast<int>(rng.below(4)));
      } else if (roll < 12) {
        alt = nullptr;
      } else if (roll == 12) {
        alt = defaults.autogen_prefixes[0] + random_words(rng, 2);
      } else if (roll == 13) {
        alt = "画像 IMG_" + std::to_string(1000 + d) + ".png";
      } else if (roll == 14) {
        alt = "photo of a cat";
      } else if (roll == 15) {
        alt = "犬";
      } else {
        alt = "  " + random_words(rng, 2) + "　　" + random_words(rng, 2) + "  ";
      }
      add_ref(base + path, alt);

      if (with_duplicate && k == 0) {
        const std::string dup = "/img/" + tag + "_0_small.png";
        server.add(dup, png_with_nsfw(box_downscale(raster, 2), nsfw_limit));
        add_ref(base + dup, random_words(rng, 3));
      }
    }

    switch (rng.below(8)) {
      case 0:
        add_ref(base + "/img/" + tag + "_anim.gif", "アニメ");
        break;
      case 1:
        add_ref(base + "/img/site_logo_" + tag + ".png", "ロゴ");
        break;
      case 2: {
        const std::string p = "/img/" + tag + "_thumb.png";
        server.add(p, png_with_nsfw(make_image(120, 300), nsfw_limit));
        add_ref(base + p, random_words(rng, 3));
        break;
      }
      case 3: {
        const std::string p = "/img/" + tag + "_wide.png";
        server.add(p, png_with_nsfw(make_image(420, 200), nsfw_limit));
        add_ref(base + p, random_words(rng, 3));
        break;
      }
      case 4: {
        const std::string p = "/img/" + tag + "_missing.png";
        server.add_status(p, 404);
        add_ref(base + p, nullptr);
        break;
      }
      case 5: {
        const std::string p = "/img/" + tag + "_flagged.png";
        server.add(p, png_with_nsfw(make_image(300, 300), nsfw_limit, false));
        add_ref(base + p, random_words(rng, 3));
        break;
      }
      default:
        break;
    }
    if (d % 16 == 5) add_ref(ad_url, "広告");

    std::string text;
    for (std::size_t s = 0; s < sentences.size(); ++s) {
      text += sentences[s];
      if (s % 7 == 6) text += "\n";
    }
    ordered_json doc{{"doc_id", "doc-" + std::string(d < 10 ? "00" : d < 100 ? "0" : "") + std::to_string(d)},
                     {"url", "https://example.jp/articles/" + std::to_string(d)},
                     {"text", text},
                     {"images", images}};
    out << doc.dump() << '\n';
    ++summary.documents_written;
    if (d == documents / 2) out << "{\"doc_id\": \"broken\", \"url\": \n";
  }
  return summary;
}

}  // namespace mmforge::testing
