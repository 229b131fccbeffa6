#include "mmforge/fetcher.hpp"

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "httplib.h"
#include "mmforge/image_io.hpp"
#include "mmforge/rng.hpp"

namespace mmforge::fetcher {
namespace {

using Clock = std::chrono::steady_clock;

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

FetchResult fetch_once(const std::string& url, const FetchPolicy& policy, const PipelineConfig& cfg) {
  FetchResult r;
  r.attempts = 1;
  r.started = Clock::now();
  auto finish = [&](std::optional<Reject> reject, std::string detail = {}) {
    r.reject = reject;
    r.detail = std::move(detail);
    r.finished = Clock::now();
    return std::move(r);
  };
  const auto parsed = parse_url(url);
  if (!parsed) return finish(Reject::unparseable);

  httplib::Client client(parsed->origin());
  const auto timeout = std::chrono::milliseconds(policy.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  client.set_follow_location(true);
  client.set_keep_alive(false);

  int status = 0;
  bool oversize = false;
  std::string body;
  httplib::Headers headers{{"User-Agent", policy.user_agent}};
  auto res = client.Get(
      parsed->path_and_query(), headers,
      [&](const httplib::Response& response) {
        status = response.status;
        if (status < 200 || status >= 300) return false;
        if (auto it = response.headers.find("Content-Length"); it != response.headers.end()) {
          try {
            if (std::stoll(it->second) > policy.max_bytes) {
              oversize = true;
              return false;
            }
          } catch (const std::exception&) {
          }
        }
        return true;
      },
      [&](const char* data, std::size_t len) {
        if (static_cast<long long>(body.size() + len) > policy.max_bytes) {
          oversize = true;
          return false;
        }
        body.append(data, len);
        return true;
      });

  if (oversize) return finish(Reject::oversize);
  if (status != 0 && (status < 200 || status >= 300)) {
    return finish(Reject::http_status, "HTTP " + std::to_string(status));
  }
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
        err == httplib::Error::Write) {
      return finish(Reject::timeout, httplib::to_string(err));
    }
    return finish(Reject::network_error, httplib::to_string(err));
  }

  r.bytes.assign(body.begin(), body.end());
  Raster raster;
  try {
    raster = decode_image(r.bytes);
  } catch (const DecodeError& e) {
    r.bytes.clear();
    return finish(Reject::undecodable, e.what());
  }
  if (auto reject = check_dimensions(raster.width, raster.height, cfg)) {
    r.bytes.clear();
    return finish(reject);
  }
  CandidateImage im;
  im.url = url;
  im.content_digest = sha256(r.bytes);
  im.width_px = raster.width;
  im.height_px = raster.height;
  r.image = std::move(im);
  return finish(std::nullopt);
}

}  // namespace

std::string ParsedUrl::origin() const {
  std::string o = scheme + "://" + host;
  if (port != 0) o += ":" + std::to_string(port);
  return o;
}

std::string ParsedUrl::path_and_query() const {
  return query.empty() ? path : path + "?" + query;
}

std::optional<ParsedUrl> parse_url(std::string_view url) {
  const auto sep = url.find("://");
  if (sep == std::string_view::npos || sep == 0) return std::nullopt;
  ParsedUrl p;
  p.scheme = lower(url.substr(0, sep));
  if (p.scheme != "http" && p.scheme != "https") return std::nullopt;
  std::string_view rest = url.substr(sep + 3);
  const auto auth_end = rest.find_first_of("/?#");
  std::string_view authority = rest.substr(0, auth_end);
  rest = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);
  if (const auto at = authority.rfind('@'); at != std::string_view::npos) {
    authority = authority.substr(at + 1);
  }
  std::string_view host = authority;
  std::string_view port;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(0, close + 1);
    if (close + 1 < authority.size()) {
      if (authority[close + 1] != ':') return std::nullopt;
      port = authority.substr(close + 2);
    }
  } else if (const auto colon = authority.rfind(':'); colon != std::string_view::npos) {
    host = authority.substr(0, colon);
    port = authority.substr(colon + 1);
  }
  if (host.empty() || host.find(' ') != std::string_view::npos) return std::nullopt;
  p.host = lower(host);
  if (!port.empty()) {
    if (port.size() > 5 || !std::all_of(port.begin(), port.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      return std::nullopt;
    }
    p.port = std::stoi(std::string(port));
    if (p.port == 0 || p.port > 65535) return std::nullopt;
  }
  const auto frag = rest.find('#');
  rest = rest.substr(0, frag);
  const auto q = rest.find('?');
  p.path = std::string(rest.substr(0, q));
  if (q != std::string_view::npos) p.query = std::string(rest.substr(q + 1));
  if (p.path.empty()) p.path = "/";
  return p;
}

FetchPolicy FetchPolicy::from_config(const PipelineConfig& cfg) {
  FetchPolicy p;
  p.timeout_ms = cfg.fetch_timeout_ms;
  p.max_bytes = cfg.fetch_max_bytes;
  p.rate_per_host = cfg.fetch_rate_per_host;
  p.max_in_flight = cfg.fetch_concurrency;
  p.user_agent = cfg.user_agent;
  return p;
}

const char* to_string(Reject r) {
  switch (r) {
    case Reject::unparseable: return "unparseable";
    case Reject::bad_extension: return "bad_extension";
    case Reject::blocked_keyword: return "blocked_keyword";
    case Reject::domain_cap: return "domain_cap";
    case Reject::timeout: return "timeout";
    case Reject::http_status: return "http_status";
    case Reject::oversize: return "oversize";
    case Reject::network_error: return "network_error";
    case Reject::undecodable: return "undecodable";
    case Reject::small: return "small";
    case Reject::aspect: return "aspect";
  }
  return "unknown";
}

std::optional<Reject> filter_url(std::string_view url, const FetchPolicy& policy) {
  const auto parsed = parse_url(url);
  if (!parsed) return Reject::unparseable;
  const std::string path = lower(parsed->path);
  const bool allowed = std::any_of(policy.allowed_extensions.begin(), policy.allowed_extensions.end(),
                                   [&](const std::string& ext) { return path.ends_with(lower(ext)); });
  if (!allowed) return Reject::bad_extension;
  const std::string whole = lower(url);
  for (const auto& kw : policy.blocked_keywords) {
    if (whole.find(lower(kw)) != std::string::npos) return Reject::blocked_keyword;
  }
  return std::nullopt;
}

std::string group_key(std::string_view url) {
  const auto parsed = parse_url(url);
  return parsed ? parsed->host : std::string();
}

std::vector<std::size_t> downsample_domains(const std::vector<std::string>& urls, int cap,
                                            std::uint64_t seed) {
  if (cap < 1) throw std::invalid_argument("downsample cap must be >= 1");
  std::map<std::string, std::vector<std::size_t>> by_host;
  for (std::size_t i = 0; i < urls.size(); ++i) by_host[group_key(urls[i])].push_back(i);
  std::vector<std::size_t> kept;
  for (const auto& [host, members] : by_host) {
    if (members.size() <= static_cast<std::size_t>(cap)) {
      kept.insert(kept.end(), members.begin(), members.end());
      continue;
    }
    Rng rng(derive_seed(seed, host));
    for (std::size_t k : rng.sample_indices(members.size(), static_cast<std::size_t>(cap))) {
      kept.push_back(members[k]);
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

std::optional<Reject> check_dimensions(int width, int height, const PipelineConfig& cfg) {
  if (std::min(width, height) < cfg.min_side_px) return Reject::small;
  const double aspect = static_cast<double>(width) / height;
  if (aspect < cfg.aspect_min || aspect > cfg.aspect_max) return Reject::aspect;
  return std::nullopt;
}

FetchResult fetch_image(const std::string& url, const FetchPolicy& policy, const PipelineConfig& cfg) {
  FetchResult r = fetch_once(url, policy, cfg);
  if (r.reject == Reject::timeout) {
    const auto first_start = r.started;
    r = fetch_once(url, policy, cfg);
    r.attempts = 2;
    r.started = first_start;
  }
  return r;
}

std::vector<FetchResult> Fetcher::fetch_all(const std::vector<std::string>& urls) const {
  std::vector<FetchResult> results(urls.size());
  if (urls.empty()) return results;

  struct Job {
    std::size_t index;
    int attempt;
  };
  struct HostQueue {
    std::deque<Job> jobs;
    Clock::time_point next_allowed{};
  };
  std::vector<HostQueue> hosts;
  std::unordered_map<std::string, std::size_t> host_slot;
  for (std::size_t i = 0; i < urls.size(); ++i) {
    const std::string key = group_key(urls[i]);
    auto [it, inserted] = host_slot.emplace(key, hosts.size());
    if (inserted) hosts.emplace_back();
    hosts[it->second].jobs.push_back(Job{i, 1});
  }

  const auto interval = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(1.0 / policy_.rate_per_host));
  std::mutex mu;
  std::condition_variable cv;
  std::size_t pending = urls.size();

  auto worker = [&] {
    std::unique_lock lock(mu);
    for (;;) {
      if (pending == 0) return;
      // Host whose bucket refills first; ties go to first-seen hosts.
      std::size_t pick = hosts.size();
      for (std::size_t h = 0; h < hosts.size(); ++h) {
        if (hosts[h].jobs.empty()) continue;
        if (pick == hosts.size() || hosts[h].next_allowed < hosts[pick].next_allowed) pick = h;
      }
      if (pick == hosts.size()) {
        cv.wait(lock);
        continue;
      }
      const auto now = Clock::now();
      if (hosts[pick].next_allowed > now) {
        cv.wait_until(lock, hosts[pick].next_allowed);
        continue;
      }
      const Job job = hosts[pick].jobs.front();
      hosts[pick].jobs.pop_front();
      hosts[pick].next_allowed = now + interval;
      lock.unlock();

      FetchResult r = fetch_once(urls[job.index], policy_, cfg_);

      lock.lock();
      r.attempts = job.attempt;
      if (job.attempt > 1) r.started = results[job.index].started;
      if (r.reject == Reject::timeout && job.attempt == 1) {
        results[job.index].started = r.started;
        hosts[pick].jobs.push_front(Job{job.index, 2});
      } else {
        results[job.index] = std::move(r);
        --pending;
      }
      cv.notify_all();
    }
  };

  const auto n_workers = static_cast<std::size_t>(std::max(1, policy_.max_in_flight));
  std::vector<std::thread> threads;
  threads.reserve(std::min(n_workers, urls.size()));
  for (std::size_t t = 0; t < std::min(n_workers, urls.size()); ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return results;
}

}  // namespace mmforge::fetcher
