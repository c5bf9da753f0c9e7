#include "wcam/grid.hpp"

#include <algorithm>
#include <numeric>

namespace wcam {

Plane<double> upsample_nearest(const Grid& grid, Eigen::Index rows, Eigen::Index cols) {
  if (grid.rows() == 0 || grid.cols() == 0 || rows % grid.rows() != 0 || cols % grid.cols() != 0)
    throw ShapeError("plane " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " is not an integer multiple of the " + std::to_string(grid.rows()) + "x" +
                     std::to_string(grid.cols()) + " grid");
  const Eigen::Index fr = rows / grid.rows();
  const Eigen::Index fc = cols / grid.cols();
  Plane<double> out(rows, cols);
  for (Eigen::Index r = 0; r < grid.rows(); ++r)
    for (Eigen::Index c = 0; c < grid.cols(); ++c) out.block(r * fr, c * fc, fr, fc).setConstant(grid(r, c));
  return out;
}

std::vector<Eigen::Index> rank_cells(const Grid& importance) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(importance.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const double* v = importance.data();
  std::stable_sort(order.begin(), order.end(), [v](Eigen::Index a, Eigen::Index b) { return v[a] > v[b]; });
  return order;
}

Grid cell_mask(Eigen::Index grid_size, const std::vector<Eigen::Index>& cells, Eigen::Index count) {
  if (count < 0 || count > static_cast<Eigen::Index>(cells.size()))
    throw InvalidParam("cell count outside [0, " + std::to_string(cells.size()) + "]");
  Grid mask = Grid::Zero(grid_size, grid_size);
  for (Eigen::Index i = 0; i < count; ++i) mask.data()[cells[static_cast<std::size_t>(i)]] = 1.0;
  return mask;
}

}  // namespace wcam
