#ifndef WCAM_IMAGE_HPP
#define WCAM_IMAGE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "wcam/errors.hpp"

namespace wcam {

/// One 2D channel. Row-major so that rows are contiguous, as in image files.
template <typename Scalar>
using Plane = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// H x W x C image stored channel-planar.
template <typename Scalar>
struct ImageT {
  std::vector<Plane<Scalar>> channels;

  ImageT() = default;
  ImageT(Eigen::Index rows, Eigen::Index cols, std::size_t n_channels, Scalar fill = Scalar(0))
      : channels(n_channels, Plane<Scalar>::Constant(rows, cols, fill)) {}
  explicit ImageT(std::vector<Plane<Scalar>> planes) : channels(std::move(planes)) {}

  Eigen::Index rows() const { return channels.empty() ? 0 : channels.front().rows(); }
  Eigen::Index cols() const { return channels.empty() ? 0 : channels.front().cols(); }
  std::size_t channel_count() const { return channels.size(); }

  Plane<Scalar>& operator[](std::size_t c) { return channels[c]; }
  const Plane<Scalar>& operator[](std::size_t c) const { return channels[c]; }

  bool operator==(const ImageT& other) const {
    if (channels.size() != other.channels.size()) return false;
    for (std::size_t c = 0; c < channels.size(); ++c) {
      if (channels[c].rows() != other.channels[c].rows() ||
          channels[c].cols() != other.channels[c].cols() || channels[c] != other.channels[c])
        return false;
    }
    return true;
  }
};

using Image = ImageT<double>;

/// Throws ShapeError unless every channel has the same non-empty shape.
template <typename Scalar>
void check_consistent(const ImageT<Scalar>& image) {
  if (image.channels.empty()) throw ShapeError("image has no channels");
  const auto rows = image.channels.front().rows();
  const auto cols = image.channels.front().cols();
  if (rows == 0 || cols == 0) throw ShapeError("image is empty");
  for (const auto& plane : image.channels) {
    if (plane.rows() != rows || plane.cols() != cols)
      throw ShapeError("image channels have inconsistent shapes");
  }
}

template <typename Scalar>
bool all_finite(const ImageT<Scalar>& image) {
  for (const auto& plane : image.channels) {
    if (!plane.allFinite()) return false;
  }
  return true;
}

template <typename Scalar>
void clamp_unit(ImageT<Scalar>& image) {
  for (auto& plane : image.channels) plane = plane.cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
}

template <typename Scalar>
Scalar max_abs_difference(const ImageT<Scalar>& a, const ImageT<Scalar>& b) {
  if (a.channel_count() != b.channel_count() || a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError("max_abs_difference: shape mismatch");
  Scalar worst(0);
  for (std::size_t c = 0; c < a.channel_count(); ++c)
    worst = std::max(worst, (a[c] - b[c]).cwiseAbs().maxCoeff());
  return worst;
}

template <typename Scalar>
Scalar squared_norm(const ImageT<Scalar>& image) {
  Scalar total(0);
  for (const auto& plane : image.channels) total += plane.squaredNorm();
  return total;
}

}  // namespace wcam

#endif  // WCAM_IMAGE_HPP
