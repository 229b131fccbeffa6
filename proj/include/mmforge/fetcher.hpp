#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mmforge/config.hpp"
#include "mmforge/scoring.hpp"
#include "mmforge/types.hpp"

namespace mmforge::fetcher {

struct ParsedUrl {
  std::string scheme;  // lowercase
  std::string host;    // lowercase, no port or userinfo
  int port = 0;        // 0 when absent
  std::string path;    // starts with '/', no query or fragment
  std::string query;   // without '?'

  std::string origin() const;           // scheme://host[:port]
  std::string path_and_query() const;
};

std::optional<ParsedUrl> parse_url(std::string_view url);

struct FetchPolicy {
  std::vector<std::string> allowed_extensions = {".jpg", ".jpeg", ".png"};
  std::vector<std::string> blocked_keywords = {"logo", "button", "icon", "plugin", "widget"};
  int timeout_ms = 10000;
  long long max_bytes = 10LL * 1024 * 1024;
  double rate_per_host = 2.0;
  int max_in_flight = 16;
  std::string user_agent = "mmforge/0.1";

  static FetchPolicy from_config(const PipelineConfig& cfg);
};

enum class Reject {
  unparseable,
  bad_extension,
  blocked_keyword,
  domain_cap,
  timeout,
  http_status,
  oversize,
  network_error,
  undecodable,
  small,
  aspect,
};

const char* to_string(Reject r);

// Extension test on the path (query ignored), then whole-URL keyword test,
// both case-insensitive.
std::optional<Reject> filter_url(std::string_view url, const FetchPolicy& policy);

// Host used for per-domain grouping and rate limiting ("" if unparseable).
std::string group_key(std::string_view url);

// Caps every host at `cap` URLs by seeded uniform sampling; kept URLs stay
// in input order. Returns indices into `urls`.
std::vector<std::size_t> downsample_domains(const std::vector<std::string>& urls, int cap,
                                            std::uint64_t seed);

std::optional<Reject> check_dimensions(int width, int height, const PipelineConfig& cfg);

struct FetchResult {
  std::optional<CandidateImage> image;  // set on success; phash etc. unset
  std::optional<Reject> reject;
  std::string detail;
  scoring::Bytes bytes;
  int attempts = 0;
  std::chrono::steady_clock::time_point started{};
  std::chrono::steady_clock::time_point finished{};
};

// One GET with the policy's limits, then decode and dimension checks. One
// retry happens on timeout.
FetchResult fetch_image(const std::string& url, const FetchPolicy& policy, const PipelineConfig& cfg);

// Downloads many URLs with at most policy.max_in_flight requests active and
// a burst-1 token bucket of policy.rate_per_host per host. Results are in
// input order. URLs are expected to have passed filter_url.
class Fetcher {
 public:
  Fetcher(FetchPolicy policy, PipelineConfig cfg) : policy_(std::move(policy)), cfg_(std::move(cfg)) {}

  std::vector<FetchResult> fetch_all(const std::vector<std::string>& urls) const;

 private:
  FetchPolicy policy_;
  PipelineConfig cfg_;
};

}  // namespace mmforge::fetcher
