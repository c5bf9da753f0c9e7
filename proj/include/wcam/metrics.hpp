#ifndef WCAM_METRICS_HPP
#define WCAM_METRICS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "wcam/grid.hpp"
#include "wcam/image.hpp"
#include "wcam/scorer.hpp"
#include "wcam/wavelet.hpp"

namespace wcam {

/// How a feature (one grid cell) is removed: zero its wavelet coefficient
/// group and invert, or set its pixel block to the baseline.
enum class FeatureSpace { WaveletCells, PixelCells };

std::string to_string(FeatureSpace space);
FeatureSpace parse_feature_space(const std::string& name);

struct AttributionGrid {
  Grid importance;
  FeatureSpace feature_space = FeatureSpace::WaveletCells;
  /// Value a removed feature takes (a coefficient or a pixel value).
  double baseline = 0.0;
  /// Transform used for WaveletCells.
  WaveletSpec wavelet{WaveletFamily::Haar, 2};

  Eigen::Index grid_size() const { return importance.rows(); }
  Eigen::Index features() const { return importance.size(); }
};

struct MetricOptions {
  /// Curve steps T; 0 means one feature per step (T = g^2).
  Eigen::Index steps = 0;
  /// Clamp materialized images to [0, 1] before scoring.
  bool clamp = true;
  /// mu-fidelity subset size; 0 means K / 8 (at least 1).
  Eigen::Index subset_size = 0;
  Eigen::Index n_subsets = 200;
  std::uint64_t seed = 0;
};

struct CurveResult {
  /// scores[t] for t = 0..T.
  Eigen::VectorXd scores;
  /// Features removed (deletion) or inserted (insertion) at each step.
  std::vector<Eigen::Index> counts;
  /// Trapezoidal area normalized by T.
  double auc = 0.0;
};

struct MuFidelityResult {
  double correlation = 0.0;
  /// One of the two series was constant; correlation is reported as 0.
  bool degenerate = false;
  Eigen::VectorXd attributed;
  Eigen::VectorXd drops;
};

/// Image with every feature whose `keep` cell is 0 set to the baseline.
/// An all-ones `keep` returns the input untouched.
Image materialize(const Image& image, const AttributionGrid& attr, const Grid& keep, bool clamp);

/// Feature order used by the curves: descending importance, ties by
/// ascending flat index.
std::vector<Eigen::Index> feature_order(const AttributionGrid& attr);

/// Number of features affected at step t of T.
Eigen::Index step_count(Eigen::Index t, Eigen::Index steps, Eigen::Index features);

/// Trapezoidal AUC of equally spaced scores over [0, 1].
double curve_auc(const Eigen::VectorXd& scores);

CurveResult deletion(const Image& image, const AttributionGrid& attr, Scorer& scorer, int target_class,
                     const MetricOptions& options = {});
CurveResult insertion(const Image& image, const AttributionGrid& attr, Scorer& scorer, int target_class,
                      const MetricOptions& options = {});

/// Deletion / insertion along an explicit feature order.
CurveResult deletion_along(const Image& image, const AttributionGrid& attr, const std::vector<Eigen::Index>& order,
                           Scorer& scorer, int target_class, const MetricOptions& options = {});
CurveResult insertion_along(const Image& image, const AttributionGrid& attr, const std::vector<Eigen::Index>& order,
                            Scorer& scorer, int target_class, const MetricOptions& options = {});

/// Pearson correlation of sum_{i in u} g_i with f(x) - f(x with u removed)
/// over random subsets u of fixed size.
MuFidelityResult mu_fidelity(const Image& image, const AttributionGrid& attr, Scorer& scorer, int target_class,
                             const MetricOptions& options = {});

/// Pearson correlation; `degenerate` is set when either series is constant.
double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b, bool* degenerate = nullptr);

}  // namespace wcam

#endif  // WCAM_METRICS_HPP
