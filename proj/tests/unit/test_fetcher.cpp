#include <gtest/gtest.h>

#include <algorithm>
#include <map>

#include "fixtures.hpp"
#include "mmforge/fetcher.hpp"

namespace mmforge {
namespace {

using fetcher::Reject;

TEST(Url, Parse) {
  const auto u = fetcher::parse_url("HTTPS://User@Example.JP:8443/a/b.PNG?x=1#frag");
  ASSERT_TRUE(u);
  EXPECT_EQ(u->scheme, "https");
  EXPECT_EQ(u->host, "example.jp");
  EXPECT_EQ(u->port, 8443);
  EXPECT_EQ(u->path, "/a/b.PNG");
  EXPECT_EQ(u->query, "x=1");
  EXPECT_EQ(u->origin(), "https://example.jp:8443");
  EXPECT_EQ(fetcher::parse_url("http://example.jp")->path, "/");
  EXPECT_FALSE(fetcher::parse_url("ftp://example.jp/a.png"));
  EXPECT_FALSE(fetcher::parse_url("not a url"));
  EXPECT_FALSE(fetcher::parse_url("http:///a.png"));
}

TEST(Url, Filter) {
  const fetcher::FetchPolicy p;
  EXPECT_EQ(fetcher::filter_url("http://a.jp/x.jpg", p), std::nullopt);
  EXPECT_EQ(fetcher::filter_url("http://a.jp/x.JPEG?w=3", p), std::nullopt);
  EXPECT_EQ(fetcher::filter_url("http://a.jp/x.png", p), std::nullopt);
  EXPECT_EQ(fetcher::filter_url("http://a.jp/x.gif", p), Reject::bad_extension);
  EXPECT_EQ(fetcher::filter_url("http://a.jp/x.png.html", p), Reject::bad_extension);
  EXPECT_EQ(fetcher::filter_url("http://a.jp/x", p), Reject::bad_extension);
  EXPECT_EQ(fetcher::filter_url("http://a.jp/Site_LOGO.png", p), Reject::blocked_keyword);
  EXPECT_EQ(fetcher::filter_url("http://widgets.a.jp/x.png", p), Reject::blocked_keyword);
  EXPECT_EQ(fetcher::filter_url("nope", p), Reject::unparseable);
}

TEST(Url, GroupKeyIgnoresPort) {
  EXPECT_EQ(fetcher::group_key("http://A.jp:80/x.png"), "a.jp");
  EXPECT_EQ(fetcher::group_key("http://a.jp:81/y.png"), "a.jp");
  EXPECT_EQ(fetcher::group_key("garbage"), "");
}

TEST(Downsample, CapsEachHostDeterministically) {
  std::vector<std::string> urls;
  for (int i = 0; i < 30; ++i) urls.push_back("http://big.jp/" + std::to_string(i) + ".png");
  for (int i = 0; i < 3; ++i) urls.push_back("http://small.jp/" + std::to_string(i) + ".png");
  const auto kept = fetcher::downsample_domains(urls, 10, 5);
  EXPECT_EQ(kept.size(), 13u);
  EXPECT_TRUE(std::is_sorted(kept.begin(), kept.end()));
  EXPECT_EQ(std::count_if(kept.begin(), kept.end(), [](std::size_t k) { return k >= 30; }), 3);
  EXPECT_EQ(kept, fetcher::downsample_domains(urls, 10, 5));
  EXPECT_NE(kept, fetcher::downsample_domains(urls, 10, 6));
}

TEST(Dimensions, Boundaries) {
  const PipelineConfig cfg;
  EXPECT_EQ(fetcher::check_dimensions(149, 200, cfg), Reject::small);
  EXPECT_EQ(fetcher::check_dimensions(200, 149, cfg), Reject::small);
  EXPECT_EQ(fetcher::check_dimensions(150, 150, cfg), std::nullopt);
  EXPECT_EQ(fetcher::check_dimensions(490, 1000, cfg), Reject::aspect);
  EXPECT_EQ(fetcher::check_dimensions(500, 1000, cfg), std::nullopt);
  EXPECT_EQ(fetcher::check_dimensions(402, 200, cfg), Reject::aspect);
  EXPECT_EQ(fetcher::check_dimensions(400, 200, cfg), std::nullopt);
}

class FetchTest : public ::testing::Test {
 protected:
  void SetUp() override {
    Rng rng(1);
    good_ = encode_png(testing::smooth_image(200, 180, rng));
    server_.add("/ok.png", good_);
    server_.add("/tiny.png", encode_png(testing::smooth_image(100, 100, rng)));
    server_.add("/garbage.png", testing::Bytes{'n', 'o', 'p', 'e'});
    server_.add("/slow.png", good_, "image/png", 1500);
    server_.add_status("/gone.png", 410);
    server_.start();
    policy_.timeout_ms = 300;
  }

  fetcher::FetchResult get(const std::string& path) {
    return fetcher::fetch_image(server_.base() + path, policy_, cfg_);
  }

  testing::ImageServer server_;
  testing::Bytes good_;
  fetcher::FetchPolicy policy_;
  PipelineConfig cfg_;
};

TEST_F(FetchTest, Success) {
  const auto r = get("/ok.png");
  ASSERT_TRUE(r.image) << r.detail;
  EXPECT_EQ(r.image->width_px, 200);
  EXPECT_EQ(r.image->height_px, 180);
  EXPECT_EQ(r.image->content_digest, sha256(good_));
  EXPECT_EQ(r.bytes, good_);
  EXPECT_EQ(r.attempts, 1);
}

TEST_F(FetchTest, Rejects) {
  EXPECT_EQ(get("/tiny.png").reject, Reject::small);
  EXPECT_EQ(get("/garbage.png").reject, Reject::undecodable);
  EXPECT_EQ(get("/gone.png").reject, Reject::http_status);
  EXPECT_EQ(get("/missing.png").reject, Reject::http_status);
  policy_.max_bytes = 100;
  EXPECT_EQ(get("/ok.png").reject, Reject::oversize);
}

TEST_F(FetchTest, TimeoutRetriesOnce) {
  const auto r = get("/slow.png");
  EXPECT_EQ(r.reject, Reject::timeout);
  EXPECT_EQ(r.attempts, 2);
}

TEST_F(FetchTest, ConnectionRefused) {
  const auto r = fetcher::fetch_image("http://127.0.0.1:1/x.png", policy_, cfg_);
  EXPECT_EQ(r.reject, Reject::network_error);
}

TEST_F(FetchTest, SendsUserAgent) {
  policy_.user_agent = "agent-under-test";
  httplib::Server ua_server;
  std::string seen;
  ua_server.Get("/ua.png", [&](const httplib::Request& req, httplib::Response& res) {
    seen = req.get_header_value("User-Agent");
    res.set_content(std::string(good_.begin(), good_.end()), "image/png");
  });
  const int port = ua_server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { ua_server.listen_after_bind(); });
  ua_server.wait_until_ready();
  const auto r = fetcher::fetch_image("http://127.0.0.1:" + std::to_string(port) + "/ua.png", policy_, cfg_);
  ua_server.stop();
  t.join();
  EXPECT_TRUE(r.image);
  EXPECT_EQ(seen, "agent-under-test");
}

TEST(Fetcher, ResultsInInputOrderWithBoundedConcurrency) {
  Rng rng(2);
  testing::ImageServer server;
  const auto png = encode_png(testing::smooth_image(160, 160, rng));
  std::vector<std::string> urls;
  for (int i = 0; i < 24; ++i) server.add("/" + std::to_string(i) + ".png", png, "image/png", 80);
  server.start();
  for (int i = 0; i < 24; ++i) {
    urls.push_back(server.base("127.0.0." + std::to_string(1 + i % 8)) + "/" + std::to_string(i) + ".png");
  }
  urls.push_back(server.base() + "/absent.png");
  fetcher::FetchPolicy policy;
  policy.max_in_flight = 3;
  policy.rate_per_host = 1000;
  const auto results = fetcher::Fetcher(policy, PipelineConfig{}).fetch_all(urls);
  ASSERT_EQ(results.size(), urls.size());
  for (int i = 0; i < 24; ++i) {
    ASSERT_TRUE(results[i].image) << results[i].detail;
    EXPECT_EQ(results[i].image->url, urls[i]);
  }
  EXPECT_EQ(results.back().reject, Reject::http_status);
  EXPECT_LE(server.max_in_flight(), 3);
  EXPECT_GE(server.max_in_flight(), 2);
}

TEST(Fetcher, SpacesRequestsPerHost) {
  Rng rng(3);
  testing::ImageServer server;
  server.add("/a.png", encode_png(testing::smooth_image(160, 160, rng)));
  server.start();
  std::vector<std::string> urls(5, server.base() + "/a.png");
  fetcher::FetchPolicy policy;
  policy.rate_per_host = 10;
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = fetcher::Fetcher(policy, PipelineConfig{}).fetch_all(urls);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GE(elapsed, 0.4 - 0.01);
  auto hits = server.hits();
  std::sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  ASSERT_EQ(hits.size(), 5u);
  for (std::size_t i = 1; i < hits.size(); ++i) {
    EXPECT_GE(std::chrono::duration<double>(hits[i].start - hits[i - 1].start).count(), 0.09);
  }
}

}  // namespace
}  // namespace mmforge
