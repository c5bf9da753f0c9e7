#include "wcam/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <thread>

namespace wcam {

std::string to_string(MaskMode mode) { return mode == MaskMode::Binary ? "binary" : "continuous"; }

MaskMode parse_mask_mode(const std::string& name) {
  if (name == "continuous") return MaskMode::Continuous;
  if (name == "binary") return MaskMode::Binary;
  throw InvalidParam("unknown mask mode '" + name + "'");
}

void validate_config(const WcamConfig& config) {
  if (config.grid_size < 1) throw InvalidParam("grid_size must be positive");
  if (config.n_design < 2) throw InvalidParam("n_design must be at least 2");
  if (config.wavelet.levels < 1 || config.wavelet.levels > 30) throw InvalidParam("levels must be in [1, 30]");
  if (config.grid_size % (Eigen::Index{1} << config.wavelet.levels) != 0)
    throw InvalidParam("grid_size must be divisible by 2^levels");
  if (config.batch_size < 1) throw InvalidParam("batch_size must be positive");
}

void validate_config(const WcamConfig& config, Eigen::Index rows, Eigen::Index cols) {
  validate_config(config);
  if (rows % config.grid_size != 0 || cols % config.grid_size != 0)
    throw ShapeError("image " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " is not divisible by grid_size " + std::to_string(config.grid_size));
}

MaskBatch design_to_masks(const Eigen::MatrixXd& rows, Eigen::Index grid_size, MaskSource source,
                          Eigen::Index k_index) {
  if (rows.cols() != grid_size * grid_size)
    throw ShapeError("design has " + std::to_string(rows.cols()) + " columns, grid needs " +
                     std::to_string(grid_size * grid_size));
  MaskBatch out;
  out.masks.reserve(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index j = 0; j < rows.rows(); ++j) {
    out.masks.push_back(reshape_to_grid(rows.row(j), grid_size));
    out.provenance.push_back(source);
    out.k_index.push_back(source == MaskSource::C ? k_index : -1);
  }
  return out;
}

Eigen::VectorXd design_row(const DesignMatrices& design, Eigen::Index row) {
  const Eigen::Index n = design.n_design();
  const Eigen::Index K = design.dim();
  if (row < 0 || row >= n * (K + 2)) throw IndexError("design row " + std::to_string(row) + " out of range");
  if (row < n) return design.A.row(row).transpose();
  if (row < 2 * n) return design.B.row(row - n).transpose();
  const Eigen::Index k = (row - 2 * n) / n;
  const Eigen::Index j = (row - 2 * n) % n;
  Eigen::VectorXd out = design.A.row(j).transpose();
  out(k) = design.B(j, k);
  return out;
}

MaskBatch design_masks(const DesignMatrices& design, Eigen::Index grid_size) {
  auto out = design_to_masks(design.A, grid_size, MaskSource::A);
  auto append = [&out](MaskBatch&& part) {
    for (std::size_t i = 0; i < part.size(); ++i) {
      out.masks.push_back(std::move(part.masks[i]));
      out.provenance.push_back(part.provenance[i]);
      out.k_index.push_back(part.k_index[i]);
    }
  };
  append(design_to_masks(design.B, grid_size, MaskSource::B));
  for (Eigen::Index k = 0; k < design.dim(); ++k)
    append(design_to_masks(pivot_columns(design, k), grid_size, MaskSource::C, k));
  return out;
}

WaveletPyramid apply_mask(const WaveletPyramid& pyramid, const Grid& mask) {
  const Eigen::Index g = mask.rows();
  if (g == 0 || mask.cols() != g || pyramid.rows() % g != 0 || pyramid.cols() % g != 0)
    throw ShapeError("pyramid " + std::to_string(pyramid.rows()) + "x" + std::to_string(pyramid.cols()) +
                     " is not divisible by the mask grid");
  const Eigen::Index fr = pyramid.rows() / g;
  const Eigen::Index fc = pyramid.cols() / g;
  WaveletPyramid out{{}, pyramid.spec};
  out.channels.reserve(pyramid.channel_count());
  for (const auto& plane : pyramid.channels) {
    Plane<double> scaled(plane.rows(), plane.cols());
    for (Eigen::Index r = 0; r < g; ++r)
      for (Eigen::Index c = 0; c < g; ++c)
        scaled.block(r * fr, c * fc, fr, fc) = mask(r, c) * plane.block(r * fr, c * fc, fr, fc);
    out.channels.push_back(std::move(scaled));
  }
  return out;
}

Image perturbed_image(const WaveletPyramid& pyramid, const Grid& mask, bool clamp) {
  Image image = dwt_inverse(apply_mask(pyramid, mask));
  if (clamp) clamp_unit(image);
  return image;
}

namespace {

Grid row_mask(const DesignMatrices& design, Eigen::Index row, Eigen::Index grid_size, MaskMode mode) {
  Grid mask = reshape_to_grid(design_row(design, row), grid_size);
  if (mode == MaskMode::Binary) mask = (mask.array() >= 0.5).cast<double>().matrix();
  return mask;
}

}  // namespace

WCAMap compute_wcam(const Image& image, int target_class, Scorer& scorer, const WcamConfig& config) {
  check_consistent(image);
  validate_config(config, image.rows(), image.cols());

  const Eigen::Index n = config.n_design;
  const Eigen::Index K = config.dim();
  const Eigen::Index total_rows = n * (K + 2);
  const DesignMatrices design = draw_design(config.sampler, n, K);
  const WaveletPyramid pyramid = dwt_forward(image, config.wavelet);

  const auto batch = static_cast<Eigen::Index>(std::min(config.batch_size, scorer.max_batch()));
  const long n_batches = static_cast<long>((total_rows + batch - 1) / batch);
  std::vector<double> scores(static_cast<std::size_t>(total_rows));

  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::mutex error_mutex;
  long error_batch = -1;
  std::exception_ptr error;

  auto worker = [&] {
    std::vector<Image> images;
    for (long b = next++; b < n_batches && !failed; b = next++) {
      const Eigen::Index first = b * batch;
      const Eigen::Index last = std::min(total_rows, first + batch);
      try {
        images.clear();
        for (Eigen::Index row = first; row < last; ++row)
          images.push_back(perturbed_image(pyramid, row_mask(design, row, config.grid_size, config.mask_mode),
                                           config.clamp_output));
        const auto part = score_batch(scorer, images, target_class, b);
        std::copy(part.begin(), part.end(), scores.begin() + first);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (error_batch < 0 || b < error_batch) {
          error_batch = b;
          error = std::current_exception();
        }
        failed = true;
      }
    }
  };

  unsigned threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  if (!scorer.concurrent_safe()) threads = 1;
  threads = static_cast<unsigned>(std::min<long>(threads, n_batches));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);

  ScoredDesign scored;
  const Eigen::Map<const Eigen::VectorXd> all(scores.data(), total_rows);
  scored.fA = all.segment(0, n);
  scored.fB = all.segment(n, n);
  scored.fC.resize(K, n);
  for (Eigen::Index k = 0; k < K; ++k) scored.fC.row(k) = all.segment(2 * n + k * n, n).transpose();
  const SobolIndices indices = jansen_estimate(scored);

  WCAMap map;
  map.total = reshape_to_grid(indices.total, config.grid_size);
  map.first_order = reshape_to_grid(indices.first_order, config.grid_size);
  map.config = config;
  map.target_class = target_class;
  map.n_forwards = static_cast<long>(total_rows);
  map.degenerate = indices.degenerate;
  map.f_empty = indices.f_empty;
  map.variance = indices.variance;
  map.image_rows = image.rows();
  map.image_cols = image.cols();
  return map;
}

}  // namespace wcam
