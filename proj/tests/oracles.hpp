// Independent reference computations shared by the unit and acceptance tests.
// Nothing here calls the estimators under test.
#ifndef WCAM_TESTS_ORACLES_HPP
#define WCAM_TESTS_ORACLES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <vector>

#include "wcam/image.hpp"
#include "wcam/random.hpp"

namespace oracle {

inline wcam::Image random_image(Eigen::Index rows, Eigen::Index cols, std::size_t channels, std::uint64_t seed) {
  wcam::Rng rng(seed);
  wcam::Image image(rows, cols, channels);
  for (auto& plane : image.channels)
    for (Eigen::Index i = 0; i < plane.size(); ++i) plane.data()[i] = wcam::uniform01(rng);
  return image;
}

/// Matrix of a linear map on R^n, column j = f(e_j).
inline Eigen::MatrixXd linear_map_matrix(Eigen::Index n, const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f) {
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index j = 0; j < n; ++j) out.col(j) = f(Eigen::VectorXd::Unit(n, j));
  return out;
}

using VectorFunction = std::function<double(const Eigen::VectorXd&)>;

/// Monte Carlo variance of f under independent U[0,1] inputs.
inline double mc_variance(const VectorFunction& f, Eigen::Index dims, std::size_t samples, std::uint64_t seed) {
  wcam::Rng rng(seed);
  Eigen::VectorXd x(dims);
  double mean = 0.0;
  double m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    for (Eigen::Index d = 0; d < dims; ++d) x(d) = wcam::uniform01(rng);
    const double y = f(x);
    const double delta = y - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (y - mean);
  }
  return m2 / static_cast<double>(samples - 1);
}

/// Double-loop Monte Carlo total index of input k:
///   S_Tk = E_{X~k}[ Var_{Xk}(f | X~k) ] / Var(f),
/// with `outer` draws of the other inputs and `inner` draws of X_k each. The
/// outer draws are Latin-hypercube stratified to keep the oracle's own noise
/// well below the tolerances it is used with.
inline double double_loop_total(const VectorFunction& f, Eigen::Index dims, Eigen::Index k, std::size_t outer,
                                std::size_t inner, double variance, std::uint64_t seed) {
  wcam::Rng rng(seed);
  std::vector<std::vector<std::size_t>> strata(static_cast<std::size_t>(dims));
  for (auto& perm : strata) {
    perm.resize(outer);
    for (std::size_t i = 0; i < outer; ++i) perm[i] = i;
    wcam::shuffle(std::span<std::size_t>(perm), rng);
  }
  Eigen::VectorXd x(dims);
  double acc = 0.0;
  for (std::size_t o = 0; o < outer; ++o) {
    for (Eigen::Index d = 0; d < dims; ++d)
      x(d) = (static_cast<double>(strata[static_cast<std::size_t>(d)][o]) + wcam::uniform01(rng)) /
             static_cast<double>(outer);
    double mean = 0.0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < inner; ++i) {
      x(k) = wcam::uniform01(rng);
      const double y = f(x);
      const double delta = y - mean;
      mean += delta / static_cast<double>(i + 1);
      m2 += delta * (y - mean);
    }
    acc += m2 / static_cast<double>(inner - 1);
  }
  return acc / static_cast<double>(outer) / variance;
}

}  // namespace oracle

#endif  // WCAM_TESTS_ORACLES_HPP
