#pragma once

#include <httplib.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "mmforge/image_io.hpp"
#include "mmforge/rng.hpp"

namespace mmforge::testing {

using Bytes = std::vector<std::uint8_t>;

// A sum of a few random low-frequency waves plus a gradient. Different
// seeds give perceptually unrelated images.
Raster smooth_image(int width, int height, Rng& rng);
Raster noise_image(int width, int height, Rng& rng);
Raster box_downscale(const Raster& src, int factor);
Raster solid_image(int width, int height, std::uint8_t value);

// Inserts a tEXt chunk carrying `nonce` before IEND. Pixels are unchanged,
// so the phash stays the same while the encoded bytes differ.
Bytes png_with_nonce(const Bytes& png, std::uint32_t nonce);

// Encodes `raster` and searches nonces until the stub NSFW score is below
// (or, with below = false, at or above) `limit`.
Bytes png_with_nsfw(const Raster& raster, double limit, bool below = true);

// Local HTTP server for image fixtures. The port is bound on construction
// so URLs can be built first; routes must all be added before start().
// The handler tracks concurrent requests.
class ImageServer {
 public:
  struct Route {
    int status = 200;
    std::string content_type = "image/png";
    std::string body;
    int delay_ms = 0;
  };
  struct Hit {
    std::string host;
    std::string path;
    std::chrono::steady_clock::time_point start;
    std::chrono::steady_clock::time_point end;
  };

  ImageServer();
  ~ImageServer();
  ImageServer(const ImageServer&) = delete;
  ImageServer& operator=(const ImageServer&) = delete;

  void add(const std::string& path, const Bytes& body, std::string content_type = "image/png",
           int delay_ms = 0);
  void add_status(const std::string& path, int status);
  void start();
  void stop();

  int port() const { return port_; }
  // http://<host>:<port>; any 127.0.0.0/8 address reaches the server.
  std::string base(const std::string& host = "127.0.0.1") const;

  int max_in_flight() const { return max_in_flight_.load(); }
  std::vector<Hit> hits() const;

 private:
  httplib::Server server_;
  std::thread thread_;
  std::map<std::string, Route> routes_;
  int port_ = 0;
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
  mutable std::mutex hits_mu_;
  std::vector<Hit> hits_;
};

struct CorpusSummary {
  std::filesystem::path documents;
  std::size_t documents_written = 0;
  std::size_t image_refs = 0;
};

// Writes a Japanese web corpus whose images are served by
// `server`. Besides well-formed documents it plants every kind of reject:
// disallowed extensions, blocked keywords, 404s, small and extreme-aspect
// images, high NSFW scores, intra-document near duplicates, an image
// shared by a dozen documents, short and over-long documents, unusable
// alt texts and one malformed line.
CorpusSummary write_corpus(const std::filesystem::path& dir, ImageServer& server, std::uint64_t seed,
                           int documents = 200);

// Random Japanese words and sentences built from a fixed vocabulary.
std::string random_words(Rng& rng, int words);

}  // namespace mmforge::testing
