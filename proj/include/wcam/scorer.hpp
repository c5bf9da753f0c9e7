#ifndef WCAM_SCORER_HPP
#define WCAM_SCORER_HPP

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wcam/image.hpp"
#include "wcam/wavelet.hpp"

namespace wcam {

enum class ScoreKind { Probability, Logit };

std::string to_string(ScoreKind kind);
ScoreKind parse_score_kind(const std::string& name);

/// Black-box image scorer: one scalar per image for a target class.
///
/// Implementations must return exactly one score per input image, in input
/// order. `concurrent_safe()` tells callers whether `score` may be invoked
/// from several threads at once.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual std::vector<double> score(std::span<const Image> images, int target_class) = 0;

  /// Scores of every class for each image. Backends that cannot report them
  /// throw ScorerError(Protocol).
  virtual std::vector<std::vector<double>> score_all(std::span<const Image> images);

  virtual std::size_t max_batch() const { return 64; }
  virtual bool concurrent_safe() const { return false; }
  virtual ScoreKind score_kind() const { return ScoreKind::Probability; }
  virtual std::string describe() const = 0;
};

/// Validated call into a scorer: enforces the batch limit, one score per
/// image and finite scores. ScorerErrors are re-tagged with `batch_index`.
std::vector<double> score_batch(Scorer& scorer, std::span<const Image> images, int target_class,
                                long batch_index = -1);

std::vector<std::vector<double>> score_batch_all(Scorer& scorer, std::span<const Image> images,
                                                 long batch_index = -1);

/// Closed-form models used as analytic oracles.
namespace synthetic {

/// f(x) = value.
struct ConstantScore {
  double value = 0.5;
};

/// Mean over all channels of the pixels inside a rectangle given as
/// fractions of the image height and width.
struct PixelRegionMean {
  double row0 = 0.0;
  double col0 = 0.0;
  double row1 = 0.5;
  double col1 = 0.5;

  Region pixel_region(Eigen::Index rows, Eigen::Index cols) const;
};

/// f(x) = sum_c <weights[c], x[c]>.
struct PixelLinear {
  Image weights;
};

/// f(x) = sum_c <weights[c], W(x)[c]> with W the DWT in nested layout.
struct WaveletLinear {
  WaveletPyramid weights;
};

/// f(x) = sum_s weights[s] * mean of squared coefficients of subband s over
/// all channels; subbands ordered as subbands_coarse_to_fine.
struct SubbandEnergy {
  WaveletSpec spec;
  std::vector<double> weights;
};

}  // namespace synthetic

using SyntheticModel = std::variant<synthetic::ConstantScore, synthetic::PixelRegionMean,
                                    synthetic::PixelLinear, synthetic::WaveletLinear,
                                    synthetic::SubbandEnergy>;

double evaluate(const SyntheticModel& model, const Image& image);

std::string model_name(const SyntheticModel& model);

/// In-process backend for the synthetic models.
///
/// The models act as binary classifiers: class 1 scores s = f(x), class 0
/// scores 1 - s. `score` returns s for class 1 and 1 - s for class 0.
class SyntheticScorer final : public Scorer {
 public:
  explicit SyntheticScorer(SyntheticModel model, std::size_t max_batch = 64,
                           ScoreKind kind = ScoreKind::Probability);

  std::vector<double> score(std::span<const Image> images, int target_class) override;
  std::vector<std::vector<double>> score_all(std::span<const Image> images) override;
  std::size_t max_batch() const override { return max_batch_; }
  bool concurrent_safe() const override { return true; }
  ScoreKind score_kind() const override { return kind_; }
  std::string describe() const override;

  const SyntheticModel& model() const { return model_; }

 private:
  SyntheticModel model_;
  std::size_t max_batch_;
  ScoreKind kind_;
};

/// Adapts an arbitrary callable; the class is ignored.
class FunctionScorer final : public Scorer {
 public:
  using Function = std::function<double(const Image&)>;

  explicit FunctionScorer(Function fn, std::size_t max_batch = 64, bool concurrent_safe = false,
                          std::string name = "function");

  std::vector<double> score(std::span<const Image> images, int target_class) override;
  std::size_t max_batch() const override { return max_batch_; }
  bool concurrent_safe() const override { return concurrent_safe_; }
  std::string describe() const override { return name_; }

 private:
  Function fn_;
  std::size_t max_batch_;
  bool concurrent_safe_;
  std::string name_;
};

}  // namespace wcam

#endif  // WCAM_SCORER_HPP
