#ifndef WCAM_ANALYSIS_HPP
#define WCAM_ANALYSIS_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "wcam/grid.hpp"
#include "wcam/pipeline.hpp"

namespace wcam {

/// Per-cell sum of the spatially aligned cells of every subband, at the
/// resolution of the approximation block: (g / 2^L) x (g / 2^L).
///
/// A level-j block is sum-pooled by 2^(L-j) before being added, so the total
/// mass of the map is preserved exactly.
Grid spatial_project(const Grid& map, const WaveletSpec& spec);
inline Grid spatial_project(const WCAMap& map) { return spatial_project(map.total, map.wavelet()); }

enum class EmbeddingNorm { RawSum, MeanPerCell };

std::string to_string(EmbeddingNorm norm);
EmbeddingNorm parse_embedding_norm(const std::string& name);

struct ScaleEmbedding {
  /// One entry per subband ordered a, hL, vL, dL, ..., h1, v1, d1.
  Eigen::VectorXd z;
  std::vector<std::string> labels;
  EmbeddingNorm norm = EmbeddingNorm::RawSum;
  /// Number of negative cells set to zero before aggregation.
  std::size_t floored = 0;
};

/// Aggregates the map per subband. Negative cells are floored at zero unless
/// `floor_negative` is false.
ScaleEmbedding scale_embed(const Grid& map, const WaveletSpec& spec, EmbeddingNorm norm = EmbeddingNorm::RawSum,
                           bool floor_negative = true);
inline ScaleEmbedding scale_embed(const WCAMap& map, EmbeddingNorm norm = EmbeddingNorm::RawSum,
                                  bool floor_negative = true) {
  return scale_embed(map.total, map.wavelet(), norm, floor_negative);
}

struct FrequencyCurve {
  Eigen::VectorXd importance;  // normalized to sum 1
  Eigen::VectorXd cumulative;
  std::vector<std::string> labels;
  std::size_t floored = 0;
  /// The embedding had no positive mass; both vectors are zero.
  bool degenerate = false;
};

FrequencyCurve frequency_curve(const ScaleEmbedding& embedding);

/// Euclidean distance; ShapeError on length mismatch.
double embedding_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// Distances of all unordered pairs (i < j), in lexicographic pair order.
std::vector<double> pairwise_distances(const std::vector<Eigen::VectorXd>& embeddings);

struct WelchTest {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
};

/// Two-sided Welch t-test for a difference of means.
WelchTest welch_test(const std::vector<double>& a, const std::vector<double>& b);

struct ConsistencyReport {
  std::vector<double> distances;
  double mean_distance = 0.0;
  std::vector<double> noise_distances;
  double noise_mean = 0.0;
  double noise_sd = 0.0;
  /// 95% Student-t interval for the mean of the noise distances.
  double noise_ci_low = 0.0;
  double noise_ci_high = 0.0;
  /// Welch test on the two sets of pairwise distances. Pairs sharing an
  /// embedding are dependent, so its p-value is optimistic; descriptive only.
  WelchTest test;
  /// Permutation test of equal mean pairwise distance: embeddings of both
  /// sets are pooled and relabelled at random. Two-sided p-value, this is the
  /// one to act on.
  double permutation_p_value = 1.0;
  std::size_t permutations = 0;
  /// Central 95% range of the batch-group mean distance over the same
  /// relabellings. A batch mean inside it is consistent with noise.
  double batch_interval_low = 0.0;
  double batch_interval_high = 0.0;
};

/// Mean pairwise distance of a batch of embeddings set against the pairwise
/// distances of a noise baseline (repeated runs of one image).
ConsistencyReport batch_consistency(const std::vector<Eigen::VectorXd>& embeddings,
                                    const std::vector<Eigen::VectorXd>& noise_embeddings,
                                    std::size_t permutations = 9999, std::uint64_t seed = 0);

/// Embeddings of `repeats` WCAM runs of one image with seeds seed, seed+1, ...
std::vector<Eigen::VectorXd> noise_baseline(const Image& image, int target_class, Scorer& scorer,
                                            const WcamConfig& config, std::size_t repeats = 20,
                                            EmbeddingNorm norm = EmbeddingNorm::RawSum);

/// Keeps the coefficient groups of the k highest ranked cells (negative
/// indices floored, ties by ascending flat index), zeroes the rest, inverts
/// and clamps to [0, 1].
Image reconstruct_topk(const Image& image, const Grid& importance, const WaveletSpec& spec, Eigen::Index k);
inline Image reconstruct_topk(const Image& image, const WCAMap& map, Eigen::Index k) {
  return reconstruct_topk(image, map.total, map.wavelet(), k);
}

/// Ranking used by reconstruct_topk.
std::vector<Eigen::Index> rank_for_reconstruction(const Grid& importance);

struct MinimalImage {
  enum class Outcome { Sufficient, NeverSufficient };
  Outcome outcome = Outcome::NeverSufficient;
  /// Smallest sufficient k, or -1.
  Eigen::Index k = -1;
  Image image;
  /// Reconstructions sent to the scorer.
  std::size_t evaluated = 0;

  bool sufficient() const { return outcome == Outcome::Sufficient; }
};

/// Index of the largest score, first one on ties.
int predicted_class(const std::vector<double>& scores);

/// Smallest k in 1..K whose top-k reconstruction the scorer classifies as
/// `target_class`, by linear scan.
MinimalImage minimal_image(const Image& image, const Grid& importance, const WaveletSpec& spec, Scorer& scorer,
                           int target_class);
inline MinimalImage minimal_image(const Image& image, const WCAMap& map, Scorer& scorer, int target_class) {
  return minimal_image(image, map.total, map.wavelet(), scorer, target_class);
}

}  // namespace wcam

#endif  // WCAM_ANALYSIS_HPP
