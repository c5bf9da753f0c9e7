#include "wcam/remote.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "wcam/protocol.hpp"
#include "wcam/random.hpp"

namespace wcam {

namespace {

class TransportFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool transient_status(int status) { return status == 502 || status == 503 || status == 504; }

}  // namespace

HttpScorer::HttpScorer(const std::string& endpoint, RemoteOptions options) : options_(options) {
  if (options_.max_batch == 0) throw InvalidParam("max_batch must be positive");
  if (options_.max_in_flight < 1 || options_.max_in_flight > 1024)
    throw InvalidParam("max_in_flight must lie in [1, 1024]");
  const std::string scheme = "http://";
  if (endpoint.rfind("https://", 0) == 0) throw InvalidParam("https endpoints are not supported");
  if (endpoint.rfind(scheme, 0) != 0) throw InvalidParam("scorer URL must start with http://");
  const auto slash = endpoint.find('/', scheme.size());
  host_ = endpoint.substr(0, slash);
  std::string path = slash == std::string::npos ? "" : endpoint.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  const std::string suffix = "/score";
  if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0)
    path += suffix;
  path_ = path;
  if (host_.size() <= scheme.size()) throw InvalidParam("scorer URL has no host");
  in_flight_ = std::make_unique<std::counting_semaphore<1024>>(options_.max_in_flight);
}

std::string HttpScorer::post(const std::string& payload) {
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{*in_flight_};

  const auto timeout = std::chrono::duration<double>(options_.timeout_seconds);
  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    httplib::Client client(host_);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
    auto result = client.Post(path_, payload, protocol::kContentType);
    if (!result) {
      last_error = httplib::to_string(result.error());
      continue;
    }
    if (transient_status(result->status)) {
      last_error = "HTTP " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      // Error bodies follow the response schema; surface their message.
      try {
        protocol::decode_scores(result->body, 0);
      } catch (const ScorerError& e) {
        throw ScorerError(ScorerError::Kind::Protocol,
                          "HTTP " + std::to_string(result->status) + " from " + host_ + ": " + e.what());
      }
      throw ScorerError(ScorerError::Kind::Protocol, "HTTP " + std::to_string(result->status) + " from " + host_);
    }
    return result->body;
  }
  throw ScorerError(ScorerError::Kind::Transport,
                    host_ + path_ + " unreachable after " + std::to_string(options_.retries + 1) +
                        " attempts: " + last_error);
}

std::vector<double> HttpScorer::score(std::span<const Image> images, int target_class) {
  const std::string body = post(protocol::encode_request(images, target_class, options_.score_kind, false));
  return protocol::decode_scores(body, images.size());
}

std::vector<std::vector<double>> HttpScorer::score_all(std::span<const Image> images) {
  const std::string body = post(protocol::encode_request(images, 0, options_.score_kind, true));
  return protocol::decode_all_scores(body, images.size());
}

SubprocessScorer::SubprocessScorer(std::string command, RemoteOptions options)
    : command_(std::move(command)), options_(options) {
  if (command_.empty()) throw InvalidParam("subprocess command is empty");
  if (options_.max_batch == 0) throw InvalidParam("max_batch must be positive");
}

SubprocessScorer::~SubprocessScorer() { stop(); }

void SubprocessScorer::start() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0)
    throw TransportFailure(std::string("socketpair: ") + std::strerror(errno));
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw TransportFailure(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  socket_ = fds[0];
  pid_ = pid;
}

void SubprocessScorer::stop() {
  if (socket_ >= 0) {
    ::shutdown(socket_, SHUT_RDWR);
    ::close(socket_);
    socket_ = -1;
  }
  if (pid_ > 0) {
    int status = 0;
    // Give the child a moment to exit on EOF before forcing it.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::string SubprocessScorer::exchange(const std::string& payload) {
  const int timeout_ms = static_cast<int>(std::min(options_.timeout_seconds * 1000.0, 2.0e9));
  auto send_all = [&](const std::string& bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
      const ssize_t n = ::send(socket_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw TransportFailure(std::string("write to scorer process failed: ") + std::strerror(errno));
      sent += static_cast<std::size_t>(n);
    }
  };
  auto recv_exact = [&](char* out, std::size_t size) {
    std::size_t got = 0;
    while (got < size) {
      pollfd pfd{socket_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, timeout_ms);
      if (ready < 0 && errno == EINTR) continue;
      if (ready == 0) throw TransportFailure("scorer process timed out");
      if (ready < 0) throw TransportFailure(std::string("poll: ") + std::strerror(errno));
      const ssize_t n = ::recv(socket_, out + got, size - got, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw TransportFailure("scorer process closed its output");
      got += static_cast<std::size_t>(n);
    }
  };

  std::string last_error;
  for (int attempt = 0; attempt <= options_.retries; ++attempt) {
    try {
      if (socket_ < 0) start();
      send_all(protocol::frame(payload));
      std::array<unsigned char, 4> prefix{};
      recv_exact(reinterpret_cast<char*>(prefix.data()), prefix.size());
      std::string body(protocol::read_frame_length(prefix), '\0');
      recv_exact(body.data(), body.size());
      return body;
    } catch (const TransportFailure& e) {
      last_error = e.what();
      stop();
    }
  }
  throw ScorerError(ScorerError::Kind::Transport,
                    "subprocess '" + command_ + "' failed after " + std::to_string(options_.retries + 1) +
                        " attempts: " + last_error);
}

std::vector<double> SubprocessScorer::score(std::span<const Image> images, int target_class) {
  const std::lock_guard lock(mutex_);
  const std::string body = exchange(protocol::encode_request(images, target_class, options_.score_kind, false));
  return protocol::decode_scores(body, images.size());
}

std::vector<std::vector<double>> SubprocessScorer::score_all(std::span<const Image> images) {
  const std::lock_guard lock(mutex_);
  const std::string body = exchange(protocol::encode_request(images, 0, options_.score_kind, true));
  return protocol::decode_all_scores(body, images.size());
}

namespace {

std::map<std::string, std::string> parse_params(const std::string& text) {
  std::map<std::string, std::string> params;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidParam("synthetic model parameter '" + item + "' is not key=value");
    params[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return params;
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidParam("parameter " + key + "='" + value + "' is not a number");
  }
}

class Params {
 public:
  explicit Params(std::map<std::string, std::string> values) : values_(std::move(values)) {}

  double number(const std::string& key, double fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double v = to_double(key, it->second);
    values_.erase(it);
    return v;
  }
  std::string text(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }
  void finish(const std::string& model) const {
    if (!values_.empty()) throw InvalidParam("unknown parameter '" + values_.begin()->first + "' for " + model);
  }

 private:
  std::map<std::string, std::string> values_;
};

WaveletSpec wavelet_from(Params& params, const ScorerContext& context) {
  WaveletSpec spec = context.wavelet;
  spec.family = parse_wavelet_family(params.text("wavelet", to_string(spec.family)));
  spec.levels = static_cast<int>(params.number("levels", spec.levels));
  return spec;
}

}  // namespace

SyntheticModel parse_synthetic_model(const std::string& description, const ScorerContext& context) {
  const auto colon = description.find(':');
  const std::string name = description.substr(0, colon);
  Params params(parse_params(colon == std::string::npos ? "" : description.substr(colon + 1)));

  if (name == "constant") {
    synthetic::ConstantScore m{params.number("value", 0.5)};
    params.finish(name);
    return m;
  }
  if (name == "region-mean") {
    synthetic::PixelRegionMean m{params.number("r0", 0.0), params.number("c0", 0.0), params.number("r1", 0.5),
                                 params.number("c1", 0.5)};
    params.finish(name);
    m.pixel_region(context.rows, context.cols);
    return m;
  }
  if (name == "pixel-linear") {
    Rng rng(static_cast<std::uint64_t>(params.number("seed", 0)));
    params.finish(name);
    const double scale = 1.0 / static_cast<double>(context.rows * context.cols *
                                                   static_cast<Eigen::Index>(context.channels));
    Image weights(context.rows, context.cols, context.channels);
    for (auto& plane : weights.channels)
      for (Eigen::Index i = 0; i < plane.size(); ++i) plane.data()[i] = 2.0 * uniform01(rng) * scale;
    return synthetic::PixelLinear{std::move(weights)};
  }
  if (name == "wavelet-linear") {
    const WaveletSpec spec = wavelet_from(params, context);
    const std::string subband = params.text("subband", "a");
    Rng rng(static_cast<std::uint64_t>(params.number("seed", 0)));
    params.finish(name);
    validate_wavelet_shape(context.rows, context.cols, spec);

    Region region{0, 0, context.rows, context.cols};
    if (subband != "all") {
      bool found = false;
      for (const auto id : subbands_coarse_to_fine(spec)) {
        if (subband_label(id) == subband) {
          region = subband_region(spec, context.rows, context.cols, id);
          found = true;
        }
      }
      if (!found) throw InvalidParam("unknown subband '" + subband + "' for " + std::to_string(spec.levels) + " levels");
    }
    const double scale = 1.0 / static_cast<double>(region.area() * static_cast<Eigen::Index>(context.channels));
    WaveletPyramid weights{std::vector<Plane<double>>(context.channels, Plane<double>::Zero(context.rows, context.cols)), spec};
    for (auto& plane : weights.channels)
      for (Eigen::Index r = region.row0; r < region.row1; ++r)
        for (Eigen::Index c = region.col0; c < region.col1; ++c) plane(r, c) = 2.0 * uniform01(rng) * scale;
    return synthetic::WaveletLinear{std::move(weights)};
  }
  if (name == "subband-energy") {
    synthetic::SubbandEnergy m;
    m.spec = wavelet_from(params, context);
    for (const auto id : subbands_coarse_to_fine(m.spec))
      m.weights.push_back(params.number(subband_label(id), id.level == 0 ? 1.0 : 0.0));
    params.finish(name);
    return m;
  }
  throw InvalidParam("unknown synthetic model '" + name + "'");
}

std::unique_ptr<Scorer> make_scorer(const std::string& spec, const ScorerContext& context) {
  if (spec.rfind("synthetic:", 0) == 0)
    return std::make_unique<SyntheticScorer>(parse_synthetic_model(spec.substr(10), context),
                                             context.remote.max_batch, context.remote.score_kind);
  if (spec.rfind("subprocess:", 0) == 0) return std::make_unique<SubprocessScorer>(spec.substr(11), context.remote);
  if (spec.rfind("http://", 0) == 0 || spec.rfind("https://", 0) == 0)
    return std::make_unique<HttpScorer>(spec, context.remote);
  throw InvalidParam("scorer must be a http:// URL, synthetic:<model> or subprocess:<command>, got '" + spec + "'");
}

}  // namespace wcam
