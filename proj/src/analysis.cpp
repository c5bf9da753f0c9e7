#include "wcam/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>

#include <boost/math/distributions/students_t.hpp>

#include "wcam/random.hpp"

namespace wcam {

namespace {

void check_square_grid(const Grid& map, const WaveletSpec& spec) {
  if (map.rows() != map.cols()) throw ShapeError("attribution grid must be square");
  if (spec.levels < 1 || spec.levels > 30) throw InvalidParam("levels must be in [1, 30]");
  if (map.rows() == 0 || map.rows() % (Eigen::Index{1} << spec.levels) != 0)
    throw ShapeError("grid_size must be divisible by 2^levels");
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (const double x : v) acc += (x - mean) * (x - mean);
  return acc / static_cast<double>(v.size() - 1);
}

}  // namespace

Grid spatial_project(const Grid& map, const WaveletSpec& spec) {
  check_square_grid(map, spec);
  const Eigen::Index g = map.rows();
  const Eigen::Index side = g >> spec.levels;
  Grid out = Grid::Zero(side, side);
  for (const SubbandId id : subbands_coarse_to_fine(spec)) {
    const Region r = subband_region(spec, g, g, id);
    const Eigen::Index pool = r.rows() / side;
    for (Eigen::Index i = 0; i < r.rows(); ++i)
      for (Eigen::Index j = 0; j < r.cols(); ++j) out(i / pool, j / pool) += map(r.row0 + i, r.col0 + j);
  }
  return out;
}

std::string to_string(EmbeddingNorm norm) { return norm == EmbeddingNorm::RawSum ? "raw-sum" : "mean-per-cell"; }

EmbeddingNorm parse_embedding_norm(const std::string& name) {
  if (name == "raw-sum" || name == "raw") return EmbeddingNorm::RawSum;
  if (name == "mean-per-cell" || name == "mean") return EmbeddingNorm::MeanPerCell;
  throw InvalidParam("unknown embedding normalization '" + name + "'");
}

ScaleEmbedding scale_embed(const Grid& map, const WaveletSpec& spec, EmbeddingNorm norm, bool floor_negative) {
  check_square_grid(map, spec);
  const Eigen::Index g = map.rows();
  const auto subbands = subbands_coarse_to_fine(spec);
  ScaleEmbedding out;
  out.norm = norm;
  out.z = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(subbands.size()));
  for (std::size_t s = 0; s < subbands.size(); ++s) {
    const Region r = subband_region(spec, g, g, subbands[s]);
    double acc = 0.0;
    for (Eigen::Index i = r.row0; i < r.row1; ++i)
      for (Eigen::Index j = r.col0; j < r.col1; ++j) {
        double v = map(i, j);
        if (floor_negative && v < 0.0) {
          v = 0.0;
          ++out.floored;
        }
        acc += v;
      }
    out.z(static_cast<Eigen::Index>(s)) = norm == EmbeddingNorm::MeanPerCell ? acc / static_cast<double>(r.area()) : acc;
    out.labels.push_back(subband_label(subbands[s]));
  }
  return out;
}

FrequencyCurve frequency_curve(const ScaleEmbedding& embedding) {
  FrequencyCurve out;
  out.labels = embedding.labels;
  out.floored = embedding.floored;
  const Eigen::VectorXd z = embedding.z.cwiseMax(0.0);
  out.floored += static_cast<std::size_t>((embedding.z.array() < 0.0).count());
  const double total = z.sum();
  out.importance = Eigen::VectorXd::Zero(z.size());
  out.cumulative = Eigen::VectorXd::Zero(z.size());
  if (!(total > 0.0)) {
    out.degenerate = true;
    return out;
  }
  out.importance = z / total;
  double running = 0.0;
  for (Eigen::Index s = 0; s < z.size(); ++s) {
    running += out.importance(s);
    out.cumulative(s) = running;
  }
  return out;
}

double embedding_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size())
    throw ShapeError("embedding lengths differ: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  return (a - b).norm();
}

std::vector<double> pairwise_distances(const std::vector<Eigen::VectorXd>& embeddings) {
  std::vector<double> out;
  for (std::size_t i = 0; i < embeddings.size(); ++i)
    for (std::size_t j = i + 1; j < embeddings.size(); ++j) out.push_back(embedding_distance(embeddings[i], embeddings[j]));
  return out;
}

WelchTest welch_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidParam("welch_test needs at least two samples per group");
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  const double va = sample_variance(a, ma) / static_cast<double>(a.size());
  const double vb = sample_variance(b, mb) / static_cast<double>(b.size());
  WelchTest out;
  const double se2 = va + vb;
  if (!(se2 > 0.0)) {
    out.p_value = ma == mb ? 1.0 : 0.0;
    out.t = ma == mb ? 0.0 : std::copysign(INFINITY, ma - mb);
    return out;
  }
  out.t = (ma - mb) / std::sqrt(se2);
  out.df = se2 * se2 /
           (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  const boost::math::students_t dist(out.df);
  out.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t)));
  return out;
}

namespace {

// Mean distance among the members of `group` (indices into the pooled
// distance matrix).
double mean_within(const Eigen::MatrixXd& d, std::span<const Eigen::Index> group) {
  double sum = 0.0;
  for (std::size_t i = 0; i < group.size(); ++i)
    for (std::size_t j = i + 1; j < group.size(); ++j) sum += d(group[i], group[j]);
  const auto n = static_cast<double>(group.size());
  return sum / (n * (n - 1.0) / 2.0);
}

}  // namespace

ConsistencyReport batch_consistency(const std::vector<Eigen::VectorXd>& embeddings,
                                    const std::vector<Eigen::VectorXd>& noise_embeddings,
                                    std::size_t permutations, std::uint64_t seed) {
  if (embeddings.size() < 2 || noise_embeddings.size() < 2)
    throw InvalidParam("batch_consistency needs at least two embeddings on each side");
  ConsistencyReport out;
  out.distances = pairwise_distances(embeddings);
  out.mean_distance = mean_of(out.distances);
  out.noise_distances = pairwise_distances(noise_embeddings);
  out.noise_mean = mean_of(out.noise_distances);
  out.noise_sd = std::sqrt(sample_variance(out.noise_distances, out.noise_mean));
  const auto n = static_cast<double>(out.noise_distances.size());
  double half_width = 0.0;
  if (out.noise_distances.size() >= 2) {
    const boost::math::students_t dist(n - 1.0);
    half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * out.noise_sd / std::sqrt(n);
  }
  out.noise_ci_low = out.noise_mean - half_width;
  out.noise_ci_high = out.noise_mean + half_width;
  if (out.distances.size() >= 2) out.test = welch_test(out.distances, out.noise_distances);

  const auto n_batch = static_cast<Eigen::Index>(embeddings.size());
  const auto n_pool = n_batch + static_cast<Eigen::Index>(noise_embeddings.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n_pool, n_pool);
  auto member = [&](Eigen::Index i) -> const Eigen::VectorXd& {
    return i < n_batch ? embeddings[static_cast<std::size_t>(i)]
                       : noise_embeddings[static_cast<std::size_t>(i - n_batch)];
  };
  for (Eigen::Index i = 0; i < n_pool; ++i)
    for (Eigen::Index j = i + 1; j < n_pool; ++j) d(i, j) = d(j, i) = embedding_distance(member(i), member(j));

  std::vector<Eigen::Index> labels(static_cast<std::size_t>(n_pool));
  std::iota(labels.begin(), labels.end(), Eigen::Index{0});
  auto statistic = [&] {
    const std::span<const Eigen::Index> all(labels);
    return std::abs(mean_within(d, all.first(static_cast<std::size_t>(n_batch))) -
                    mean_within(d, all.subspan(static_cast<std::size_t>(n_batch))));
  };
  // Small slack so permutations that reproduce the observed split count.
  const double observed = statistic() * (1.0 - 1e-12);
  Rng rng(seed);
  std::size_t extreme = 0;
  std::vector<double> means;
  means.reserve(permutations);
  for (std::size_t p = 0; p < permutations; ++p) {
    shuffle(std::span<Eigen::Index>(labels), rng);
    if (statistic() >= observed) ++extreme;
    means.push_back(mean_within(d, std::span<const Eigen::Index>(labels).first(static_cast<std::size_t>(n_batch))));
  }
  out.permutations = permutations;
  out.permutation_p_value = static_cast<double>(extreme + 1) / static_cast<double>(permutations + 1);

  if (!means.empty()) {
    std::sort(means.begin(), means.end());
    const auto at = [&](double q) {
      return means[static_cast<std::size_t>(std::lround(q * static_cast<double>(means.size() - 1)))];
    };
    out.batch_interval_low = at(0.025);
    out.batch_interval_high = at(0.975);
  }
  return out;
}

std::vector<Eigen::VectorXd> noise_baseline(const Image& image, int target_class, Scorer& scorer,
                                            const WcamConfig& config, std::size_t repeats, EmbeddingNorm norm) {
  if (repeats < 2) throw InvalidParam("noise baseline needs at least two repeats");
  std::vector<Eigen::VectorXd> out;
  out.reserve(repeats);
  for (std::size_t r = 0; r < repeats; ++r) {
    WcamConfig run = config;
    run.sampler.seed = config.sampler.seed + r;
    out.push_back(scale_embed(compute_wcam(image, target_class, scorer, run), norm).z);
  }
  return out;
}

std::vector<Eigen::Index> rank_for_reconstruction(const Grid& importance) {
  return rank_cells(importance.cwiseMax(0.0));
}

Image reconstruct_topk(const Image& image, const Grid& importance, const WaveletSpec& spec, Eigen::Index k) {
  check_square_grid(importance, spec);
  const Eigen::Index g = importance.rows();
  if (k < 0 || k > g * g) throw InvalidParam("k must be in [0, " + std::to_string(g * g) + "]");
  const WaveletPyramid pyramid = dwt_forward(image, spec);
  return perturbed_image(pyramid, cell_mask(g, rank_for_reconstruction(importance), k), true);
}

int predicted_class(const std::vector<double>& scores) {
  if (scores.empty()) throw ScorerError(ScorerError::Kind::Protocol, "empty class score vector");
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

MinimalImage minimal_image(const Image& image, const Grid& importance, const WaveletSpec& spec, Scorer& scorer,
                           int target_class) {
  check_square_grid(importance, spec);
  const Eigen::Index g = importance.rows();
  const Eigen::Index K = g * g;
  const WaveletPyramid pyramid = dwt_forward(image, spec);
  const auto order = rank_for_reconstruction(importance);
  const auto batch = static_cast<Eigen::Index>(std::max<std::size_t>(1, scorer.max_batch()));

  MinimalImage out;
  std::vector<Image> images;
  long batch_index = 0;
  for (Eigen::Index first = 1; first <= K; first += batch, ++batch_index) {
    const Eigen::Index last = std::min(K, first + batch - 1);
    images.clear();
    for (Eigen::Index k = first; k <= last; ++k) images.push_back(perturbed_image(pyramid, cell_mask(g, order, k), true));
    const auto scores = score_batch_all(scorer, images, batch_index);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      ++out.evaluated;
      if (predicted_class(scores[i]) == target_class) {
        out.outcome = MinimalImage::Outcome::Sufficient;
        out.k = first + static_cast<Eigen::Index>(i);
        out.image = std::move(images[i]);
        return out;
      }
    }
  }
  return out;
}

}  // namespace wcam
