#ifndef WCAM_GRID_HPP
#define WCAM_GRID_HPP

#include <Eigen/Dense>

#include <vector>

#include "wcam/image.hpp"
#include "wcam/wavelet.hpp"

namespace wcam {

using Grid = Plane<double>;

/// Row-major reshape of a K-vector into a g x g grid; K must equal g^2.
template <typename Derived>
Grid reshape_to_grid(const Eigen::DenseBase<Derived>& values, Eigen::Index grid_size) {
  if (values.size() != grid_size * grid_size)
    throw ShapeError("cannot reshape " + std::to_string(values.size()) + " values to a " +
                     std::to_string(grid_size) + "x" + std::to_string(grid_size) + " grid");
  Grid out(grid_size, grid_size);
  for (Eigen::Index i = 0; i < values.size(); ++i) out(i / grid_size, i % grid_size) = values(i);
  return out;
}

/// Nearest-neighbour upsampling: each cell becomes a (rows/g) x (cols/g) block.
Plane<double> upsample_nearest(const Grid& grid, Eigen::Index rows, Eigen::Index cols);

/// Flat cell indices sorted by descending value, ties by ascending index.
std::vector<Eigen::Index> rank_cells(const Grid& importance);

/// Mask with 1 on the given flat cells and 0 elsewhere.
Grid cell_mask(Eigen::Index grid_size, const std::vector<Eigen::Index>& cells, Eigen::Index count);

}  // namespace wcam

#endif  // WCAM_GRID_HPP
