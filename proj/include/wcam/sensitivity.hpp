#ifndef WCAM_SENSITIVITY_HPP
#define WCAM_SENSITIVITY_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace wcam {

/// Scores of the pick-freeze design: f(A_j), f(B_j) and f(C^(k)_j).
struct ScoredDesign {
  Eigen::VectorXd fA;
  Eigen::VectorXd fB;
  Eigen::MatrixXd fC;  // K x N, row k holds the scores of C^(k)
};

struct SobolIndices {
  Eigen::VectorXd first_order;
  Eigen::VectorXd total;
  double f_empty = 0.0;
  double variance = 0.0;
  /// Set when the sample variance of f(A) is at or below the floor; all
  /// indices are then reported as zero.
  bool degenerate = false;
};

inline constexpr double kDefaultVarianceFloor = 1e-12;

/// Jansen's estimators of first-order and total Sobol indices.
///
///   f0 = mean_j f(A_j),  V = sum_j (f(A_j) - f0)^2 / (N - 1)
///   S_k  = (V - sum_j (f(B_j) - f(C^(k)_j))^2 / 2N) / V
///   ST_k = (sum_j (f(A_j) - f(C^(k)_j))^2 / 2N) / V
///
/// All sums run in ascending index order. Negative estimates are returned
/// as computed.
SobolIndices jansen_estimate(const ScoredDesign& scores, double variance_floor = kDefaultVarianceFloor);

/// Exact Sobol-Hoeffding decomposition of a function of K independent
/// uniform binary inputs, by enumeration of all 2^K corners.
struct HoeffdingDecomposition {
  int dims = 0;
  double mean = 0.0;
  double variance = 0.0;
  /// Var(f_kappa) indexed by the bitmask of kappa; entry 0 is zero.
  std::vector<double> partial_variance;
  Eigen::VectorXd first_order;
  Eigen::VectorXd total;

  /// S_kappa = Var(f_kappa) / Var(f), zero when Var(f) is zero.
  double index(std::uint32_t subset) const;
};

using BinaryFunction = std::function<double(std::span<const int>)>;

/// Throws InvalidParam if dims < 1 or dims > 12.
HoeffdingDecomposition sobol_hoeffding_check(int dims, const BinaryFunction& f);

}  // namespace wcam

#endif  // WCAM_SENSITIVITY_HPP
