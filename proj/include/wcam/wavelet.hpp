#ifndef WCAM_WAVELET_HPP
#define WCAM_WAVELET_HPP

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wcam/image.hpp"

namespace wcam {

enum class WaveletFamily { Haar, Daubechies4 };
enum class Boundary { Periodic };

/// Multilevel transform configuration. `levels` is the number of dyadic
/// decomposition steps; level `levels` is the coarsest.
struct WaveletSpec {
  WaveletFamily family = WaveletFamily::Haar;
  int levels = 1;
  Boundary boundary = Boundary::Periodic;

  bool operator==(const WaveletSpec&) const = default;
};

std::string to_string(WaveletFamily family);
WaveletFamily parse_wavelet_family(const std::string& name);

enum class Orientation { Approx, Horizontal, Vertical, Diagonal };

/// Level 0 is the approximation block; levels 1..L hold details, L coarsest.
struct SubbandId {
  int level = 0;
  Orientation orientation = Orientation::Approx;

  bool operator==(const SubbandId&) const = default;
};

/// Half-open rectangle [row0, row1) x [col0, col1).
struct Region {
  Eigen::Index row0 = 0;
  Eigen::Index col0 = 0;
  Eigen::Index row1 = 0;
  Eigen::Index col1 = 0;

  Eigen::Index rows() const { return row1 - row0; }
  Eigen::Index cols() const { return col1 - col0; }
  Eigen::Index area() const { return rows() * cols(); }
  bool contains(Eigen::Index r, Eigen::Index c) const {
    return r >= row0 && r < row1 && c >= col0 && c < col1;
  }
  bool operator==(const Region&) const = default;
};

/// Orthonormal two-channel filter bank. `high[k] = (-1)^k low[n-1-k]`.
struct FilterBank {
  std::vector<double> low;
  std::vector<double> high;
};

const FilterBank& filter_bank(WaveletFamily family);

/// Throws unless `levels >= 1` and both sides are divisible by 2^levels.
void validate_wavelet_shape(Eigen::Index rows, Eigen::Index cols, const WaveletSpec& spec);

/// Rectangle of subband `id` in the nested layout of a rows x cols plane.
///
/// Layout at level j (block side rows/2^(j-1)): approximation top-left,
/// Horizontal top-right, Vertical bottom-left, Diagonal bottom-right.
Region subband_region(const WaveletSpec& spec, Eigen::Index rows, Eigen::Index cols, SubbandId id);

/// All 1 + 3L subbands, ordered coarse to fine: a, hL, vL, dL, ..., h1, v1, d1.
std::vector<SubbandId> subbands_coarse_to_fine(const WaveletSpec& spec);

/// Short label such as "a", "h2", "d1".
std::string subband_label(SubbandId id);

/// Coefficients of a multilevel 2D DWT, one image-sized nested plane per channel.
template <typename Scalar>
struct WaveletPyramidT {
  std::vector<Plane<Scalar>> channels;
  WaveletSpec spec;

  Eigen::Index rows() const { return channels.empty() ? 0 : channels.front().rows(); }
  Eigen::Index cols() const { return channels.empty() ? 0 : channels.front().cols(); }
  std::size_t channel_count() const { return channels.size(); }

  /// View of one subband of one channel.
  auto subband(std::size_t channel, SubbandId id) {
    const Region r = subband_region(spec, rows(), cols(), id);
    return channels[channel].block(r.row0, r.col0, r.rows(), r.cols());
  }
  auto subband(std::size_t channel, SubbandId id) const {
    const Region r = subband_region(spec, rows(), cols(), id);
    return channels[channel].block(r.row0, r.col0, r.rows(), r.cols());
  }
};

using WaveletPyramid = WaveletPyramidT<double>;

namespace detail {

// Periodic analysis of n samples read with stride `in_stride`; writes n/2
// low-pass then n/2 high-pass outputs with stride `out_stride`.
template <typename Scalar>
void analyze_1d(const Scalar* in, Eigen::Index in_stride, Eigen::Index n, Scalar* out,
                Eigen::Index out_stride, const FilterBank& bank) {
  const Eigen::Index half = n / 2;
  const auto taps = static_cast<Eigen::Index>(bank.low.size());
  const double* low = bank.low.data();
  const double* high = bank.high.data();
  for (Eigen::Index j = 0; j < half; ++j) {
    Scalar lo(0);
    Scalar hi(0);
    const bool wraps = 2 * j + taps > n;
    for (Eigen::Index k = 0; k < taps; ++k) {
      Eigen::Index idx = 2 * j + k;
      if (wraps) idx %= n;
      const Scalar x = in[idx * in_stride];
      lo += Scalar(low[k]) * x;
      hi += Scalar(high[k]) * x;
    }
    out[j * out_stride] = lo;
    out[(half + j) * out_stride] = hi;
  }
}

// Transpose of analyze_1d: reads n/2 low then n/2 high coefficients.
template <typename Scalar>
void synthesize_1d(const Scalar* in, Eigen::Index in_stride, Eigen::Index n, Scalar* out,
                   Eigen::Index out_stride, const FilterBank& bank) {
  const Eigen::Index half = n / 2;
  const auto taps = static_cast<Eigen::Index>(bank.low.size());
  const double* low = bank.low.data();
  const double* high = bank.high.data();
  for (Eigen::Index i = 0; i < n; ++i) out[i * out_stride] = Scalar(0);
  for (Eigen::Index j = 0; j < half; ++j) {
    const Scalar lo = in[j * in_stride];
    const Scalar hi = in[(half + j) * in_stride];
    const bool wraps = 2 * j + taps > n;
    for (Eigen::Index k = 0; k < taps; ++k) {
      Eigen::Index idx = 2 * j + k;
      if (wraps) idx %= n;
      out[idx * out_stride] += Scalar(low[k]) * lo + Scalar(high[k]) * hi;
    }
  }
}

// The separable pass leaves colsH(rowsL) bottom-left and colsL(rowsH)
// top-right; the nested layout wants Horizontal top-right.
template <typename Scalar>
void swap_off_diagonal(Plane<Scalar>& plane, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index hr = rows / 2;
  const Eigen::Index hc = cols / 2;
  plane.block(0, hc, hr, hc).swap(plane.block(hr, 0, hr, hc));
}

template <typename Scalar>
struct Scratch {
  std::vector<Scalar> line;
  Plane<Scalar> block;
};

// Column passes run as whole-row updates so that memory access stays
// contiguous; row passes filter each row in turn.
template <typename Scalar>
void forward_level(Plane<Scalar>& plane, Eigen::Index rows, Eigen::Index cols,
                   const FilterBank& bank, Scratch<Scalar>& scratch) {
  const Eigen::Index stride = plane.cols();
  Scalar* data = plane.data();
  scratch.line.resize(static_cast<std::size_t>(cols));
  for (Eigen::Index r = 0; r < rows; ++r) {
    Scalar* row = data + r * stride;
    std::copy(row, row + cols, scratch.line.begin());
    analyze_1d(scratch.line.data(), 1, cols, row, 1, bank);
  }
  scratch.block = plane.topLeftCorner(rows, cols);
  auto out = plane.topLeftCorner(rows, cols);
  const Eigen::Index half = rows / 2;
  const std::size_t taps = bank.low.size();
  for (Eigen::Index j = 0; j < half; ++j) {
    out.row(j).setZero();
    out.row(half + j).setZero();
    for (std::size_t k = 0; k < taps; ++k) {
      const Eigen::Index idx = (2 * j + static_cast<Eigen::Index>(k)) % rows;
      out.row(j) += Scalar(bank.low[k]) * scratch.block.row(idx);
      out.row(half + j) += Scalar(bank.high[k]) * scratch.block.row(idx);
    }
  }
  swap_off_diagonal(plane, rows, cols);
}

template <typename Scalar>
void inverse_level(Plane<Scalar>& plane, Eigen::Index rows, Eigen::Index cols,
                   const FilterBank& bank, Scratch<Scalar>& scratch) {
  const Eigen::Index stride = plane.cols();
  Scalar* data = plane.data();
  swap_off_diagonal(plane, rows, cols);
  scratch.block = plane.topLeftCorner(rows, cols);
  auto out = plane.topLeftCorner(rows, cols);
  out.setZero();
  const Eigen::Index half = rows / 2;
  const std::size_t taps = bank.low.size();
  for (Eigen::Index j = 0; j < half; ++j) {
    for (std::size_t k = 0; k < taps; ++k) {
      const Eigen::Index idx = (2 * j + static_cast<Eigen::Index>(k)) % rows;
      out.row(idx) += Scalar(bank.low[k]) * scratch.block.row(j) + Scalar(bank.high[k]) * scratch.block.row(half + j);
    }
  }
  scratch.line.resize(static_cast<std::size_t>(cols));
  for (Eigen::Index r = 0; r < rows; ++r) {
    Scalar* row = data + r * stride;
    std::copy(row, row + cols, scratch.line.begin());
    synthesize_1d(scratch.line.data(), 1, cols, row, 1, bank);
  }
}

}  // namespace detail

/// Channel-wise multilevel 2D DWT into the nested layout.
///
/// Horizontal detail is low-pass along rows and high-pass along columns, so it
/// responds to horizontal edges (intensity changing from one row to the next).
template <typename Scalar>
WaveletPyramidT<Scalar> dwt_forward(const ImageT<Scalar>& image, const WaveletSpec& spec) {
  check_consistent(image);
  validate_wavelet_shape(image.rows(), image.cols(), spec);
  if (!all_finite(image)) throw NonFiniteError("dwt_forward: image contains NaN or Inf");

  const FilterBank& bank = filter_bank(spec.family);
  WaveletPyramidT<Scalar> pyramid{image.channels, spec};
  detail::Scratch<Scalar> scratch;
  for (auto& plane : pyramid.channels) {
    Eigen::Index rows = plane.rows();
    Eigen::Index cols = plane.cols();
    for (int level = 1; level <= spec.levels; ++level) {
      detail::forward_level(plane, rows, cols, bank, scratch);
      rows /= 2;
      cols /= 2;
    }
  }
  return pyramid;
}

/// Exact synthesis inverse of dwt_forward. Output is not clamped.
/// Takes the pyramid by value so callers can move a scratch pyramid in and
/// have it inverted in place.
template <typename Scalar>
ImageT<Scalar> dwt_inverse(WaveletPyramidT<Scalar> pyramid) {
  if (pyramid.channels.empty()) throw ShapeError("dwt_inverse: pyramid has no channels");
  for (const auto& plane : pyramid.channels) {
    if (plane.rows() != pyramid.rows() || plane.cols() != pyramid.cols())
      throw ShapeError("dwt_inverse: channels have inconsistent shapes");
  }
  validate_wavelet_shape(pyramid.rows(), pyramid.cols(), pyramid.spec);

  const WaveletSpec spec = pyramid.spec;
  const FilterBank& bank = filter_bank(spec.family);
  ImageT<Scalar> image{std::move(pyramid.channels)};
  detail::Scratch<Scalar> scratch;
  for (auto& plane : image.channels) {
    for (int level = spec.levels; level >= 1; --level) {
      const Eigen::Index shift = level - 1;
      detail::inverse_level(plane, plane.rows() >> shift, plane.cols() >> shift, bank, scratch);
    }
  }
  return image;
}

}  // namespace wcam

#endif  // WCAM_WAVELET_HPP
