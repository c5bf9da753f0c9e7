#include "wcam/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "wcam/random.hpp"

namespace wcam {

std::string to_string(FeatureSpace space) { return space == FeatureSpace::PixelCells ? "pixel" : "wavelet"; }

FeatureSpace parse_feature_space(const std::string& name) {
  if (name == "wavelet") return FeatureSpace::WaveletCells;
  if (name == "pixel") return FeatureSpace::PixelCells;
  throw InvalidParam("unknown feature space '" + name + "'");
}

namespace {

void check_attribution(const Image& image, const AttributionGrid& attr) {
  check_consistent(image);
  if (attr.importance.rows() != attr.importance.cols() || attr.importance.size() == 0)
    throw ShapeError("attribution grid must be square and non-empty");
  if (!attr.importance.allFinite()) throw NonFiniteError("attribution contains NaN or Inf");
  if (image.rows() % attr.grid_size() != 0 || image.cols() % attr.grid_size() != 0)
    throw ShapeError("image is not divisible by the attribution grid");
  if (attr.feature_space == FeatureSpace::WaveletCells) {
    validate_wavelet_shape(image.rows(), image.cols(), attr.wavelet);
    if (attr.grid_size() % (Eigen::Index{1} << attr.wavelet.levels) != 0)
      throw ShapeError("grid_size must be divisible by 2^levels");
  }
}

// Builds and scores `count` images in chunks of the scorer's batch limit so
// that only one batch is held in memory; scores come back in index order.
template <typename Make>
std::vector<double> score_generated(Scorer& scorer, std::size_t count, int target_class, Make make) {
  std::vector<double> out;
  out.reserve(count);
  const std::size_t batch = std::max<std::size_t>(1, scorer.max_batch());
  std::vector<Image> images;
  long index = 0;
  for (std::size_t start = 0; start < count; start += batch, ++index) {
    images.clear();
    for (std::size_t i = start; i < std::min(count, start + batch); ++i) images.push_back(make(i));
    const auto part = score_batch(scorer, images, target_class, index);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

Eigen::Index resolve_steps(const MetricOptions& options, Eigen::Index features) {
  const Eigen::Index steps = options.steps == 0 ? features : options.steps;
  if (steps < 1 || steps > features)
    throw InvalidParam("steps must be in [1, " + std::to_string(features) + "]");
  return steps;
}

enum class Direction { Delete, Insert };

CurveResult run_curve(const Image& image, const AttributionGrid& attr, const std::vector<Eigen::Index>& order,
                      Scorer& scorer, int target_class, const MetricOptions& options, Direction direction) {
  check_attribution(image, attr);
  const Eigen::Index K = attr.features();
  if (static_cast<Eigen::Index>(order.size()) != K) throw ShapeError("feature order must list every feature");
  std::vector<char> seen(static_cast<std::size_t>(K), 0);
  for (const Eigen::Index i : order) {
    if (i < 0 || i >= K || seen[static_cast<std::size_t>(i)]) throw InvalidParam("feature order is not a permutation");
    seen[static_cast<std::size_t>(i)] = 1;
  }
  const Eigen::Index T = resolve_steps(options, K);
  const Eigen::Index g = attr.grid_size();

  CurveResult out;
  for (Eigen::Index t = 0; t <= T; ++t) out.counts.push_back(step_count(t, T, K));
  const auto scores = score_generated(scorer, out.counts.size(), target_class, [&](std::size_t t) {
    // Deletion removes the top-n features; insertion keeps only them.
    const Grid top = cell_mask(g, order, out.counts[t]);
    const Grid keep = direction == Direction::Delete ? Grid((1.0 - top.array()).matrix()) : top;
    return materialize(image, attr, keep, options.clamp);
  });
  out.scores = Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()));
  out.auc = curve_auc(out.scores);
  return out;
}

}  // namespace

Image materialize(const Image& image, const AttributionGrid& attr, const Grid& keep, bool clamp) {
  check_attribution(image, attr);
  if (keep.rows() != attr.grid_size() || keep.cols() != attr.grid_size())
    throw ShapeError("keep mask does not match the attribution grid");
  if ((keep.array() == 1.0).all()) return image;

  const Plane<double> up = upsample_nearest(keep, image.rows(), image.cols());
  const Plane<double> fill = ((1.0 - up.array()) * attr.baseline).matrix();
  Image out;
  if (attr.feature_space == FeatureSpace::PixelCells) {
    out = image;
    for (auto& plane : out.channels) plane = plane.cwiseProduct(up) + fill;
  } else {
    WaveletPyramid pyramid = dwt_forward(image, attr.wavelet);
    for (auto& plane : pyramid.channels) plane = plane.cwiseProduct(up) + fill;
    out = dwt_inverse(pyramid);
  }
  if (clamp) clamp_unit(out);
  return out;
}

std::vector<Eigen::Index> feature_order(const AttributionGrid& attr) { return rank_cells(attr.importance); }

Eigen::Index step_count(Eigen::Index t, Eigen::Index steps, Eigen::Index features) {
  return t * features / steps;
}

double curve_auc(const Eigen::VectorXd& scores) {
  if (scores.size() < 2) throw InvalidParam("a curve needs at least two points");
  const Eigen::Index T = scores.size() - 1;
  double acc = 0.0;
  for (Eigen::Index t = 0; t < T; ++t) acc += 0.5 * (scores(t) + scores(t + 1));
  return acc / static_cast<double>(T);
}

CurveResult deletion_along(const Image& image, const AttributionGrid& attr, const std::vector<Eigen::Index>& order,
                           Scorer& scorer, int target_class, const MetricOptions& options) {
  return run_curve(image, attr, order, scorer, target_class, options, Direction::Delete);
}

CurveResult insertion_along(const Image& image, const AttributionGrid& attr, const std::vector<Eigen::Index>& order,
                            Scorer& scorer, int target_class, const MetricOptions& options) {
  return run_curve(image, attr, order, scorer, target_class, options, Direction::Insert);
}

CurveResult deletion(const Image& image, const AttributionGrid& attr, Scorer& scorer, int target_class,
                     const MetricOptions& options) {
  return deletion_along(image, attr, feature_order(attr), scorer, target_class, options);
}

CurveResult insertion(const Image& image, const AttributionGrid& attr, Scorer& scorer, int target_class,
                      const MetricOptions& options) {
  return insertion_along(image, attr, feature_order(attr), scorer, target_class, options);
}

double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool* degenerate) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeError("pearson needs two series of equal length >= 2");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = (da * da).sum();
  const double sbb = (db * db).sum();
  const bool flat = !(saa > 0.0) || !(sbb > 0.0);
  if (degenerate) *degenerate = flat;
  if (flat) return 0.0;
  return std::clamp((da * db).sum() / std::sqrt(saa * sbb), -1.0, 1.0);
}

MuFidelityResult mu_fidelity(const Image& image, const AttributionGrid& attr, Scorer& scorer, int target_class,
                             const MetricOptions& options) {
  check_attribution(image, attr);
  const Eigen::Index K = attr.features();
  const Eigen::Index d = options.subset_size == 0 ? std::max<Eigen::Index>(1, K / 8) : options.subset_size;
  const Eigen::Index m = options.n_subsets;
  if (d < 1 || d > K) throw InvalidParam("subset_size must be in [1, " + std::to_string(K) + "]");
  if (m < 2) throw InvalidParam("n_subsets must be at least 2");

  Rng rng(options.seed);
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(K));
  std::vector<Grid> keeps;
  MuFidelityResult out;
  out.attributed.resize(m);
  for (Eigen::Index s = 0; s < m; ++s) {
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    Grid keep = Grid::Ones(attr.grid_size(), attr.grid_size());
    double attributed = 0.0;
    for (Eigen::Index i = 0; i < d; ++i) {
      const auto j = i + static_cast<Eigen::Index>(uniform_below(rng, static_cast<std::uint64_t>(K - i)));
      std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
      const Eigen::Index cell = pool[static_cast<std::size_t>(i)];
      keep.data()[cell] = 0.0;
      attributed += attr.importance.data()[cell];
    }
    out.attributed(s) = attributed;
    keeps.push_back(std::move(keep));
  }
  // Entry 0 is the unperturbed image.
  const auto scores = score_generated(scorer, keeps.size() + 1, target_class, [&](std::size_t i) {
    return i == 0 ? image : materialize(image, attr, keeps[i - 1], options.clamp);
  });
  out.drops.resize(m);
  for (Eigen::Index s = 0; s < m; ++s) out.drops(s) = scores[0] - scores[static_cast<std::size_t>(s + 1)];
  out.correlation = pearson(out.attributed, out.drops, &out.degenerate);
  return out;
}

}  // namespace wcam
