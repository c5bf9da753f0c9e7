#include "wcam/scorer.hpp"

#include <cmath>
#include <sstream>

namespace wcam {

std::string to_string(ScoreKind kind) {
  return kind == ScoreKind::Probability ? "probability" : "logit";
}

ScoreKind parse_score_kind(const std::string& name) {
  if (name == "probability") return ScoreKind::Probability;
  if (name == "logit") return ScoreKind::Logit;
  throw InvalidParam("unknown score kind '" + name + "' (expected probability or logit)");
}

std::vector<std::vector<double>> Scorer::score_all(std::span<const Image>) {
  throw ScorerError(ScorerError::Kind::Protocol, describe() + " does not report all-class scores");
}

namespace {

void check_batch(const Scorer& scorer, std::span<const Image> images) {
  if (images.size() > scorer.max_batch())
    throw InvalidParam("batch of " + std::to_string(images.size()) + " exceeds max_batch " +
                       std::to_string(scorer.max_batch()));
}

}  // namespace

std::vector<double> score_batch(Scorer& scorer, std::span<const Image> images, int target_class,
                                long batch_index) {
  check_batch(scorer, images);
  std::vector<double> scores;
  try {
    scores = scorer.score(images, target_class);
  } catch (const ScorerError& e) {
    throw e.with_batch(batch_index);
  }
  if (scores.size() != images.size())
    throw ScorerError(ScorerError::Kind::Protocol,
                      "expected " + std::to_string(images.size()) + " scores, got " +
                          std::to_string(scores.size()),
                      batch_index);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i]))
      throw ScorerError(ScorerError::Kind::NonFinite,
                        "score " + std::to_string(i) + " of the batch is not finite", batch_index);
  }
  return scores;
}

std::vector<std::vector<double>> score_batch_all(Scorer& scorer, std::span<const Image> images,
                                                 long batch_index) {
  check_batch(scorer, images);
  std::vector<std::vector<double>> scores;
  try {
    scores = scorer.score_all(images);
  } catch (const ScorerError& e) {
    throw e.with_batch(batch_index);
  }
  if (scores.size() != images.size())
    throw ScorerError(ScorerError::Kind::Protocol, "all-class score count mismatch", batch_index);
  for (const auto& row : scores) {
    if (row.empty())
      throw ScorerError(ScorerError::Kind::Protocol, "empty class-score vector", batch_index);
    for (double v : row) {
      if (!std::isfinite(v))
        throw ScorerError(ScorerError::Kind::NonFinite, "non-finite class score", batch_index);
    }
  }
  return scores;
}

namespace synthetic {

Region PixelRegionMean::pixel_region(Eigen::Index rows, Eigen::Index cols) const {
  auto edge = [](double f, Eigen::Index n) {
    return static_cast<Eigen::Index>(std::floor(std::clamp(f, 0.0, 1.0) * static_cast<double>(n) + 1e-9));
  };
  Region r{edge(row0, rows), edge(col0, cols), edge(row1, rows), edge(col1, cols)};
  if (r.rows() <= 0 || r.cols() <= 0) throw InvalidParam("PixelRegionMean: empty region");
  return r;
}

}  // namespace synthetic

namespace {

struct Evaluator {
  const Image& image;

  double operator()(const synthetic::ConstantScore& m) const { return m.value; }

  double operator()(const synthetic::PixelRegionMean& m) const {
    const Region r = m.pixel_region(image.rows(), image.cols());
    double sum = 0.0;
    for (const auto& plane : image.channels) sum += plane.block(r.row0, r.col0, r.rows(), r.cols()).sum();
    return sum / static_cast<double>(r.area() * static_cast<Eigen::Index>(image.channel_count()));
  }

  double operator()(const synthetic::PixelLinear& m) const {
    if (m.weights.channel_count() != image.channel_count() || m.weights.rows() != image.rows() ||
        m.weights.cols() != image.cols())
      throw ShapeError("PixelLinear: weight shape does not match the image");
    double sum = 0.0;
    for (std::size_t c = 0; c < image.channel_count(); ++c) sum += m.weights[c].cwiseProduct(image[c]).sum();
    return sum;
  }

  double operator()(const synthetic::WaveletLinear& m) const {
    if (m.weights.channel_count() != image.channel_count() || m.weights.rows() != image.rows() ||
        m.weights.cols() != image.cols())
      throw ShapeError("WaveletLinear: weight shape does not match the image");
    const WaveletPyramid coeffs = dwt_forward(image, m.weights.spec);
    double sum = 0.0;
    for (std::size_t c = 0; c < image.channel_count(); ++c)
      sum += m.weights.channels[c].cwiseProduct(coeffs.channels[c]).sum();
    return sum;
  }

  double operator()(const synthetic::SubbandEnergy& m) const {
    const auto ids = subbands_coarse_to_fine(m.spec);
    if (m.weights.size() != ids.size())
      throw InvalidParam("SubbandEnergy: expected " + std::to_string(ids.size()) + " subband weights");
    const WaveletPyramid coeffs = dwt_forward(image, m.spec);
    double sum = 0.0;
    for (std::size_t s = 0; s < ids.size(); ++s) {
      if (m.weights[s] == 0.0) continue;
      double energy = 0.0;
      Eigen::Index count = 0;
      for (std::size_t c = 0; c < coeffs.channel_count(); ++c) {
        const auto block = coeffs.subband(c, ids[s]);
        energy += block.squaredNorm();
        count += block.size();
      }
      sum += m.weights[s] * energy / static_cast<double>(count);
    }
    return sum;
  }
};

struct Namer {
  std::string operator()(const synthetic::ConstantScore& m) const {
    std::ostringstream os;
    os << "constant(" << m.value << ")";
    return os.str();
  }
  std::string operator()(const synthetic::PixelRegionMean& m) const {
    std::ostringstream os;
    os << "region-mean(" << m.row0 << "," << m.col0 << "," << m.row1 << "," << m.col1 << ")";
    return os.str();
  }
  std::string operator()(const synthetic::PixelLinear&) const { return "pixel-linear"; }
  std::string operator()(const synthetic::WaveletLinear&) const { return "wavelet-linear"; }
  std::string operator()(const synthetic::SubbandEnergy&) const { return "subband-energy"; }
};

}  // namespace

double evaluate(const SyntheticModel& model, const Image& image) {
  check_consistent(image);
  return std::visit(Evaluator{image}, model);
}

std::string model_name(const SyntheticModel& model) { return std::visit(Namer{}, model); }

SyntheticScorer::SyntheticScorer(SyntheticModel model, std::size_t max_batch, ScoreKind kind)
    : model_(std::move(model)), max_batch_(max_batch), kind_(kind) {
  if (max_batch_ == 0) throw InvalidParam("max_batch must be positive");
}

std::vector<double> SyntheticScorer::score(std::span<const Image> images, int target_class) {
  if (target_class != 0 && target_class != 1)
    throw ScorerError(ScorerError::Kind::Protocol,
                      "synthetic models have classes 0 and 1, got " + std::to_string(target_class));
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& image : images) {
    const double s = evaluate(model_, image);
    out.push_back(target_class == 1 ? s : 1.0 - s);
  }
  return out;
}

std::vector<std::vector<double>> SyntheticScorer::score_all(std::span<const Image> images) {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (const auto& image : images) {
    const double s = evaluate(model_, image);
    out.push_back({1.0 - s, s});
  }
  return out;
}

std::string SyntheticScorer::describe() const { return "synthetic:" + model_name(model_); }

FunctionScorer::FunctionScorer(Function fn, std::size_t max_batch, bool concurrent_safe, std::string name)
    : fn_(std::move(fn)), max_batch_(max_batch), concurrent_safe_(concurrent_safe), name_(std::move(name)) {
  if (max_batch_ == 0) throw InvalidParam("max_batch must be positive");
}

std::vector<double> FunctionScorer::score(std::span<const Image> images, int) {
  std::vector<double> out;
  out.reserve(images.size());
  for (const auto& image : images) out.push_back(fn_(image));
  return out;
}

}  // namespace wcam
