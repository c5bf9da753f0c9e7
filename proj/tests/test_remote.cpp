#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <thread>

// Eigen must come before httplib: <resolv.h> defines a `_res` macro.
#include "oracles.hpp"
#include "wcam/protocol.hpp"
#include "wcam/remote.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace wcam;
namespace proto = wcam::protocol;

namespace {

// httplib server on a free port, running handle_score_request on `scorer`.
// The first `fail_first` requests get 503.
class LocalServer {
 public:
  LocalServer(Scorer& scorer, int fail_first = 0) : scorer_(scorer), fail_first_(fail_first) {
    server_.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
      ++requests_;
      if (fail_first_-- > 0) {
        res.status = 503;
        return;
      }
      const auto reply = proto::handle_score_request(scorer_, req.body);
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
  int requests() const { return requests_; }

 private:
  Scorer& scorer_;
  std::atomic<int> fail_first_;
  std::atomic<int> requests_{0};
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

// Child process whose first stdout line is returned.
struct Child {
  pid_t pid = -1;
  std::string first_line;

  explicit Child(std::vector<std::string> args) {
    int fds[2];
    if (::pipe(fds) != 0) throw std::runtime_error("pipe");
    pid = ::fork();
    if (pid == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[0]);
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      ::execv(argv[0], argv.data());
      ::_exit(127);
    }
    ::close(fds[1]);
    char c;
    while (::read(fds[0], &c, 1) == 1 && c != '\n') first_line.push_back(c);
    ::close(fds[0]);
  }
  ~Child() {
    if (pid > 0) {
      ::kill(pid, SIGTERM);
      ::waitpid(pid, nullptr, 0);
    }
  }
};

std::vector<Image> ramp_images(std::size_t n, Eigen::Index side, std::size_t channels) {
  std::vector<Image> images;
  for (std::size_t i = 0; i < n; ++i) images.push_back(oracle::random_image(side, side, channels, 100 + i));
  return images;
}

}  // namespace

TEST(HttpScorer, MatchesInProcessScores) {
  SyntheticScorer local(synthetic::PixelRegionMean{}, 4);
  LocalServer server(local);
  HttpScorer remote(server.url());
  const auto images = ramp_images(5, 8, 3);
  const auto got = remote.score(images, 1);
  const auto want = local.score(images, 1);
  ASSERT_EQ(got.size(), 5u);
  // The wire carries float32 pixels.
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
  const auto all = remote.score_all(images);
  EXPECT_NEAR(all[2][0], 1.0 - want[2], 1e-6);
}

TEST(HttpScorer, PathNormalisation) {
  EXPECT_EQ(HttpScorer("http://h:1").path(), "/score");
  EXPECT_EQ(HttpScorer("http://h:1/").path(), "/score");
  EXPECT_EQ(HttpScorer("http://h:1/v1/score").path(), "/v1/score");
  EXPECT_EQ(HttpScorer("http://h:1/v1").host(), "http://h:1");
  EXPECT_THROW(HttpScorer("http://"), InvalidParam);
}

TEST(HttpScorer, RetriesTransientFailures) {
  SyntheticScorer local(synthetic::ConstantScore{0.4});
  LocalServer server(local, 2);
  RemoteOptions options;
  options.retries = 2;
  HttpScorer remote(server.url(), options);
  EXPECT_NEAR(remote.score(ramp_images(1, 4, 1), 1)[0], 0.4, 1e-12);
  EXPECT_EQ(server.requests(), 3);
}

TEST(HttpScorer, GivesUpAfterRetries) {
  SyntheticScorer local(synthetic::ConstantScore{0.4});
  LocalServer server(local, 10);
  RemoteOptions options;
  options.retries = 1;
  HttpScorer remote(server.url(), options);
  try {
    remote.score(ramp_images(1, 4, 1), 1);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::Transport);
  }
  EXPECT_EQ(server.requests(), 2);
}

TEST(HttpScorer, UnreachableIsTransportError) {
  RemoteOptions options;
  options.retries = 0;
  options.timeout_seconds = 2;
  HttpScorer remote("http://127.0.0.1:1", options);
  try {
    remote.score(ramp_images(1, 4, 1), 0);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::Transport);
  }
}

TEST(HttpScorer, ServerErrorIsProtocolErrorWithCode) {
  FunctionScorer broken([](const Image&) -> double { throw std::runtime_error("gpu on fire"); });
  LocalServer server(broken);
  HttpScorer remote(server.url());
  try {
    score_batch(remote, ramp_images(2, 4, 1), 0, 5);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::Protocol);
    EXPECT_EQ(e.batch_index(), 5);
    EXPECT_NE(std::string(e.what()).find("HTTP 500"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("inference_failure"), std::string::npos);
  }
}

TEST(HttpScorer, ConcurrentCallsKeepOrder) {
  FunctionScorer f([](const Image& im) { return im[0](0, 0); }, 64, true);
  LocalServer server(f);
  HttpScorer remote(server.url());
  std::vector<std::thread> threads;
  std::atomic<int> bad{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      std::vector<Image> images;
      for (int i = 0; i < 4; ++i) images.emplace_back(2, 2, 1, (t * 4 + i) / 64.0);
      const auto s = remote.score(images, 0);
      for (int i = 0; i < 4; ++i)
        if (s[static_cast<std::size_t>(i)] != (t * 4 + i) / 64.0) ++bad;
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(bad.load(), 0);
}

TEST(SubprocessScorer, TalksToStdioServer) {
  const std::string cmd = std::string(WCAM_SERVER_PATH) + " --stdio --size 8 --channels 3 --model region-mean";
  SubprocessScorer remote(cmd);
  SyntheticScorer local(synthetic::PixelRegionMean{});
  const auto images = ramp_images(3, 8, 3);
  const auto got = remote.score(images, 1);
  const auto want = local.score(images, 1);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(got[i], want[i], 1e-6);
  // Reuses the same child for a second call.
  EXPECT_NEAR(remote.score(images, 0)[1], 1.0 - want[1], 1e-6);
  EXPECT_EQ(remote.score_all(images).size(), 3u);
}

TEST(SubprocessScorer, DeadCommandIsTransportError) {
  RemoteOptions options;
  options.retries = 1;
  SubprocessScorer remote("exit 0", options);
  try {
    remote.score(ramp_images(1, 4, 1), 0);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::Transport);
  }
}

TEST(SubprocessScorer, ErrorReplyIsProtocolError) {
  // The server is built for 8x8 wavelet-linear weights; 4x4 images fail to score.
  const std::string cmd = std::string(WCAM_SERVER_PATH) + " --stdio --size 8 --channels 1 --model wavelet-linear";
  SubprocessScorer remote(cmd);
  try {
    remote.score(ramp_images(1, 4, 1), 1);
    FAIL();
  } catch (const ScorerError& e) {
    EXPECT_EQ(e.kind(), ScorerError::Kind::Protocol);
    EXPECT_NE(std::string(e.what()).find("inference_failure"), std::string::npos);
  }
}

TEST(SyntheticServer, InfoAndScoreEndpoints) {
  Child server({WCAM_SERVER_PATH, "--port", "0", "--size", "8", "--channels", "3", "--model", "constant:value=0.8"});
  const std::string prefix = "listening on ";
  ASSERT_EQ(server.first_line.rfind(prefix, 0), 0u) << server.first_line;
  const std::string url = server.first_line.substr(prefix.size());

  httplib::Client client(url);
  const auto info = client.Get("/info");
  ASSERT_TRUE(info);
  EXPECT_EQ(info->status, 200);
  const auto body = nlohmann::json::parse(info->body);
  EXPECT_EQ(body["classes"].get<int>(), 2);
  EXPECT_EQ(body["preprocessing"]["resize"].get<int>(), 8);

  HttpScorer remote(url);
  const auto scores = remote.score(ramp_images(2, 8, 3), 1);
  ASSERT_EQ(scores.size(), 2u);
  for (const double s : scores) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    EXPECT_NEAR(s, 0.8, 1e-12);
  }

  const auto bad = client.Post("/score", std::string("nonsense"), proto::kContentType);
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);
  std::string short_tensor = proto::encode_request(ramp_images(1, 8, 3), 1, ScoreKind::Probability);
  short_tensor.resize(short_tensor.size() - 4);
  const auto mismatch = client.Post("/score", short_tensor, proto::kContentType);
  ASSERT_TRUE(mismatch);
  EXPECT_EQ(mismatch->status, 422);
  EXPECT_EQ(nlohmann::json::parse(mismatch->body)["error"]["code"], "shape_mismatch");
}

TEST(SyntheticServer, GoldenFixturesAgainstStdio) {
  // Raw fixture bytes framed by hand, piped through the stdio server.
  const std::string cmd = std::string(WCAM_SERVER_PATH) + " --stdio --size 2 --channels 2 --model region-mean";
  SubprocessScorer remote(cmd);
  std::ifstream in(std::string(WCAM_GOLDEN_DIR) + "/request_ok.bin", std::ios::binary);
  const std::string payload{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto request = proto::decode_request(payload);
  const auto scores = remote.score(request.images, 1);
  EXPECT_NEAR(scores[0], 0.125, 1e-7);
  EXPECT_NEAR(scores[1], 1.125, 1e-7);
}
