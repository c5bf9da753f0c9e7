// Serves a synthetic model over the scoring protocol, either as an HTTP
// service (POST /score, GET /info) or on stdin/stdout with length-prefixed
// frames. Useful as a stand-in backend and for protocol tests.

#include <cstdio>
#include <iostream>
#include <string>

#include <unistd.h>

// Eigen must come before httplib: <resolv.h> defines a `_res` macro.
#include "wcam/protocol.hpp"
#include "wcam/remote.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace {

bool read_exact(int fd, char* data, std::size_t n) {
  while (n > 0) {
    const ssize_t got = ::read(fd, data, n);
    if (got <= 0) return false;
    data += got;
    n -= static_cast<std::size_t>(got);
  }
  return true;
}

bool write_all(int fd, const std::string& bytes) {
  const char* p = bytes.data();
  std::size_t n = bytes.size();
  while (n > 0) {
    const ssize_t put = ::write(fd, p, n);
    if (put <= 0) return false;
    p += put;
    n -= static_cast<std::size_t>(put);
  }
  return true;
}

int serve_stdio(wcam::Scorer& scorer) {
  for (;;) {
    unsigned char prefix[4];
    if (!read_exact(STDIN_FILENO, reinterpret_cast<char*>(prefix), 4)) return 0;
    std::string payload(wcam::protocol::read_frame_length(std::span<const unsigned char, 4>(prefix)), '\0');
    if (!read_exact(STDIN_FILENO, payload.data(), payload.size())) return 1;
    const auto reply = wcam::protocol::handle_score_request(scorer, payload);
    if (!write_all(STDOUT_FILENO, wcam::protocol::frame(reply.body))) return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic scoring backend"};
  std::string model = "constant";
  std::string host = "127.0.0.1";
  int port = 8080;
  bool stdio = false;
  wcam::ScorerContext context;
  int side = 224;
  std::string wavelet = "haar";
  app.add_option("--model", model, "Synthetic model, e.g. region-mean:r1=0.5,c1=0.5")->capture_default_str();
  app.add_option("--host", host)->capture_default_str();
  app.add_option("--port", port, "0 picks a free port")->capture_default_str();
  app.add_flag("--stdio", stdio, "Serve length-prefixed frames on stdin/stdout");
  app.add_option("--size", side, "Image side the model is built for")->capture_default_str();
  app.add_option("--channels", context.channels)->capture_default_str();
  app.add_option("--levels", context.wavelet.levels)->capture_default_str();
  app.add_option("--wavelet", wavelet)->capture_default_str();
  app.add_option("--max-batch", context.remote.max_batch)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::unique_ptr<wcam::SyntheticScorer> scorer;
  try {
    context.rows = side;
    context.cols = side;
    context.wavelet.family = wcam::parse_wavelet_family(wavelet);
    scorer = std::make_unique<wcam::SyntheticScorer>(wcam::parse_synthetic_model(model, context),
                                                     context.remote.max_batch);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  if (stdio) return serve_stdio(*scorer);

  const nlohmann::json info = {{"model", scorer->describe()},
                               {"classes", 2},
                               {"preprocessing", {{"resize", side}, {"scale", "1/255"}, {"mean", {0, 0, 0}}, {"std", {1, 1, 1}}}},
                               {"score_kind", wcam::to_string(scorer->score_kind())},
                               {"version", wcam::protocol::kVersion}};
  httplib::Server server;
  server.Get("/info", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(info.dump(), "application/json");
  });
  server.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
    const auto reply = wcam::protocol::handle_score_request(*scorer, req.body);
    res.status = reply.status;
    res.set_content(reply.body, "application/json");
  });
  if (port == 0) port = server.bind_to_any_port(host);
  else if (!server.bind_to_port(host, port)) port = -1;
  if (port < 0) {
    std::cerr << "error: cannot bind " << host << "\n";
    return 4;
  }
  std::printf("listening on http://%s:%d\n", host.c_str(), port);
  std::fflush(stdout);
  return server.listen_after_bind() ? 0 : 4;
}
