#ifndef WCAM_QMC_HPP
#define WCAM_QMC_HPP

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace wcam {

enum class Sampler { SobolSequence, Halton, LatinHypercube, MonteCarlo };

std::string to_string(Sampler sampler);
Sampler parse_sampler(const std::string& name);

struct SamplerKind {
  Sampler sampler = Sampler::SobolSequence;
  std::uint64_t seed = 0;

  bool operator==(const SamplerKind&) const = default;
};

/// The two independent N x K matrices of the pick-freeze design.
struct DesignMatrices {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  Eigen::Index n_design() const { return A.rows(); }
  Eigen::Index dim() const { return A.cols(); }
};

/// Unscrambled Sobol' sequence in Gray-code order, 32-bit resolution.
///
/// Direction numbers: Joe & Kuo (2008), "new-joe-kuo-6.21201", so at most
/// 21201 dimensions.
class SobolSequence {
 public:
  explicit SobolSequence(std::size_t dimensions);

  static std::size_t max_dimensions();
  std::size_t dimensions() const { return directions_.size(); }

  /// Integer coordinates (scale by 2^-32) of points 0..n-1, one row per point.
  std::vector<std::uint32_t> integer_points(std::size_t n) const;

  /// Points 0..n-1 as an n x dimensions matrix in [0, 1).
  Eigen::MatrixXd points(std::size_t n) const;

 private:
  std::vector<std::array<std::uint32_t, 32>> directions_;
};

/// Owen-style nested uniform scramble of a 32-bit base-2 coordinate
/// (hash-based, after Burley 2020).
std::uint32_t nested_uniform_scramble(std::uint32_t x, std::uint32_t seed);

/// n points of dimension `dim` from the given sampler, rows are points.
Eigen::MatrixXd draw_points(const SamplerKind& kind, Eigen::Index n, Eigen::Index dim);

/// Draws A and B by sampling 2K-dimensional points and splitting the columns.
DesignMatrices draw_design(const SamplerKind& kind, Eigen::Index n_design, Eigen::Index dim);

/// C^(k): A with column k taken from B.
Eigen::MatrixXd pivot_columns(const DesignMatrices& design, Eigen::Index k);

/// Kolmogorov-Smirnov style star discrepancy of 1D samples against U[0,1].
double star_discrepancy_1d(std::span<const double> samples);

/// First n primes.
std::vector<std::uint32_t> first_primes(std::size_t n);

}  // namespace wcam

#endif  // WCAM_QMC_HPP
