#ifndef WCAM_PIPELINE_HPP
#define WCAM_PIPELINE_HPP

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

#include "wcam/grid.hpp"
#include "wcam/image.hpp"
#include "wcam/qmc.hpp"
#include "wcam/scorer.hpp"
#include "wcam/sensitivity.hpp"
#include "wcam/wavelet.hpp"

namespace wcam {

/// Continuous masks scale coefficients by the design value; binary masks
/// keep a coefficient group iff its design value is at least 0.5.
enum class MaskMode { Continuous, Binary };

std::string to_string(MaskMode mode);
MaskMode parse_mask_mode(const std::string& name);

struct WcamConfig {
  Eigen::Index grid_size = 28;
  Eigen::Index n_design = 8;
  SamplerKind sampler;
  WaveletSpec wavelet{WaveletFamily::Haar, 2};
  std::size_t batch_size = 64;
  ScoreKind score_kind = ScoreKind::Probability;
  bool clamp_output = true;
  MaskMode mask_mode = MaskMode::Continuous;
  /// Worker threads for scoring; 0 picks the hardware concurrency. Serial
  /// scorers always get one.
  unsigned threads = 0;

  Eigen::Index dim() const { return grid_size * grid_size; }
  Eigen::Index n_forwards() const { return n_design * (dim() + 2); }
};

/// Throws InvalidParam for values outside their domain.
void validate_config(const WcamConfig& config);
/// Also checks that the image side is a multiple of the grid and of 2^L.
void validate_config(const WcamConfig& config, Eigen::Index rows, Eigen::Index cols);

enum class MaskSource { A, B, C };

struct MaskBatch {
  std::vector<Grid> masks;
  std::vector<MaskSource> provenance;
  /// Pivot column for C masks, -1 otherwise.
  std::vector<Eigen::Index> k_index;

  std::size_t size() const { return masks.size(); }
};

/// Row-major reshape of each design row into a g x g mask.
MaskBatch design_to_masks(const Eigen::MatrixXd& rows, Eigen::Index grid_size, MaskSource source = MaskSource::A,
                          Eigen::Index k_index = -1);

/// Every mask of a full run in scoring order: A rows, B rows, then C^(k) rows
/// for k = 0..K-1. Materializes N(K+2) grids; meant for small K.
MaskBatch design_masks(const DesignMatrices& design, Eigen::Index grid_size);

/// Design row `row` of the full run (ordering as in design_masks) as a K-vector.
Eigen::VectorXd design_row(const DesignMatrices& design, Eigen::Index row);

/// Multiplies the nearest-neighbour upsampled mask into every channel.
WaveletPyramid apply_mask(const WaveletPyramid& pyramid, const Grid& mask);

/// Inverse transform of the masked pyramid, clamped to [0, 1] if asked.
Image perturbed_image(const WaveletPyramid& pyramid, const Grid& mask, bool clamp);

struct WCAMap {
  Grid total;
  Grid first_order;
  WcamConfig config;
  int target_class = 0;
  long n_forwards = 0;
  bool degenerate = false;
  double f_empty = 0.0;
  double variance = 0.0;
  Eigen::Index image_rows = 0;
  Eigen::Index image_cols = 0;

  Eigen::Index grid_size() const { return total.rows(); }
  const WaveletSpec& wavelet() const { return config.wavelet; }
};

/// Draws the design, scores all N(K+2) perturbed images and estimates the
/// total and first-order indices of every mask cell.
///
/// Scores are stored by design row, so batch completion order never affects
/// the result. ScorerErrors propagate tagged with the failing batch index
/// (the lowest one if several batches fail).
WCAMap compute_wcam(const Image& image, int target_class, Scorer& scorer, const WcamConfig& config);

}  // namespace wcam

#endif  // WCAM_PIPELINE_HPP
