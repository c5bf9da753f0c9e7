#ifndef WCAM_REMOTE_HPP
#define WCAM_REMOTE_HPP

#include <memory>
#include <mutex>
#include <semaphore>
#include <string>

#include "wcam/scorer.hpp"

namespace wcam {

struct RemoteOptions {
  std::size_t max_batch = 32;
  /// Extra attempts after a transport failure.
  int retries = 2;
  double timeout_seconds = 120.0;
  ScoreKind score_kind = ScoreKind::Probability;
  /// HTTP only: requests allowed in flight at once.
  std::ptrdiff_t max_in_flight = 4;
};

/// Scores through `POST <endpoint>/score` (see protocol.hpp for framing).
class HttpScorer final : public Scorer {
 public:
  explicit HttpScorer(const std::string& endpoint, RemoteOptions options = {});

  std::vector<double> score(std::span<const Image> images, int target_class) override;
  std::vector<std::vector<double>> score_all(std::span<const Image> images) override;
  std::size_t max_batch() const override { return options_.max_batch; }
  bool concurrent_safe() const override { return true; }
  ScoreKind score_kind() const override { return options_.score_kind; }
  std::string describe() const override { return host_ + path_; }

  const std::string& host() const { return host_; }
  const std::string& path() const { return path_; }

 private:
  std::string post(const std::string& payload);

  std::string host_;
  std::string path_;
  RemoteOptions options_;
  std::unique_ptr<std::counting_semaphore<1024>> in_flight_;
};

/// Runs `command` through /bin/sh and exchanges length-prefixed frames on its
/// stdin/stdout. Calls are serialized; a dead child is restarted on retry.
class SubprocessScorer final : public Scorer {
 public:
  explicit SubprocessScorer(std::string command, RemoteOptions options = {});
  ~SubprocessScorer() override;

  SubprocessScorer(const SubprocessScorer&) = delete;
  SubprocessScorer& operator=(const SubprocessScorer&) = delete;

  std::vector<double> score(std::span<const Image> images, int target_class) override;
  std::vector<std::vector<double>> score_all(std::span<const Image> images) override;
  std::size_t max_batch() const override { return options_.max_batch; }
  bool concurrent_safe() const override { return false; }
  ScoreKind score_kind() const override { return options_.score_kind; }
  std::string describe() const override { return "subprocess:" + command_; }

 private:
  std::string exchange(const std::string& payload);
  void start();
  void stop();

  std::string command_;
  RemoteOptions options_;
  std::mutex mutex_;
  int socket_ = -1;
  int pid_ = -1;
};

/// Shape information needed to instantiate image-size dependent synthetic
/// models from a textual description.
struct ScorerContext {
  Eigen::Index rows = 224;
  Eigen::Index cols = 224;
  std::size_t channels = 3;
  WaveletSpec wavelet{WaveletFamily::Haar, 2};
  RemoteOptions remote;
};

/// Parses "<model>[:key=value,...]" where model is one of constant,
/// region-mean, pixel-linear, wavelet-linear, subband-energy.
SyntheticModel parse_synthetic_model(const std::string& description, const ScorerContext& context);

/// Builds a scorer from "http://host:port[/path]", "synthetic:<model>[:params]"
/// or "subprocess:<command>".
std::unique_ptr<Scorer> make_scorer(const std::string& spec, const ScorerContext& context);

}  // namespace wcam

#endif  // WCAM_REMOTE_HPP
