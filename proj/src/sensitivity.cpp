#include "wcam/sensitivity.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "wcam/errors.hpp"

namespace wcam {

SobolIndices jansen_estimate(const ScoredDesign& scores, double variance_floor) {
  const Eigen::Index n = scores.fA.size();
  const Eigen::Index k_dim = scores.fC.rows();
  if (n < 2) throw InvalidParam("jansen_estimate needs at least 2 designs");
  if (scores.fB.size() != n || scores.fC.cols() != n)
    throw ShapeError("jansen_estimate: fA, fB and fC disagree on the number of designs");
  if (!scores.fA.allFinite() || !scores.fB.allFinite() || !scores.fC.allFinite())
    throw NonFiniteError("jansen_estimate: non-finite score");

  SobolIndices out;
  out.first_order = Eigen::VectorXd::Zero(k_dim);
  out.total = Eigen::VectorXd::Zero(k_dim);

  double sum = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) sum += scores.fA[j];
  out.f_empty = sum / static_cast<double>(n);

  double sq = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const double d = scores.fA[j] - out.f_empty;
    sq += d * d;
  }
  out.variance = sq / static_cast<double>(n - 1);

  if (!(out.variance > variance_floor)) {
    out.degenerate = true;
    return out;
  }

  const double two_n = 2.0 * static_cast<double>(n);
  for (Eigen::Index k = 0; k < k_dim; ++k) {
    double total_sq = 0.0;
    double first_sq = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double c = scores.fC(k, j);
      const double da = scores.fA[j] - c;
      const double db = scores.fB[j] - c;
      total_sq += da * da;
      first_sq += db * db;
    }
    out.total[k] = (total_sq / two_n) / out.variance;
    out.first_order[k] = (out.variance - first_sq / two_n) / out.variance;
  }
  return out;
}

double HoeffdingDecomposition::index(std::uint32_t subset) const {
  if (subset >= partial_variance.size()) throw IndexError("subset outside the power set");
  return variance > 0.0 ? partial_variance[subset] / variance : 0.0;
}

HoeffdingDecomposition sobol_hoeffding_check(int dims, const BinaryFunction& f) {
  if (dims < 1 || dims > 12)
    throw InvalidParam("sobol_hoeffding_check supports 1..12 binary features, got " + std::to_string(dims));
  const std::size_t corners = std::size_t{1} << dims;
  const std::size_t full = corners - 1;

  std::vector<double> values(corners);
  std::vector<int> bits(static_cast<std::size_t>(dims));
  for (std::size_t x = 0; x < corners; ++x) {
    for (int k = 0; k < dims; ++k) bits[static_cast<std::size_t>(k)] = static_cast<int>((x >> k) & 1u);
    values[x] = f(std::span<const int>(bits));
  }

  HoeffdingDecomposition out;
  out.dims = dims;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(corners);
  double sq = 0.0;
  for (double v : values) sq += (v - out.mean) * (v - out.mean);
  out.variance = sq / static_cast<double>(corners);

  // For each corner x: cond[tau] = E[f | X_tau = x_tau], obtained as a
  // subset-sum over the free coordinates, then Moebius-inverted into the
  // Hoeffding components f_kappa(x).
  out.partial_variance.assign(corners, 0.0);
  std::vector<double> table(corners);
  for (std::size_t x = 0; x < corners; ++x) {
    for (std::size_t z = 0; z < corners; ++z) table[z] = values[x ^ z];
    for (int k = 0; k < dims; ++k) {
      const std::size_t bit = std::size_t{1} << k;
      for (std::size_t s = 0; s < corners; ++s)
        if (s & bit) table[s] += table[s ^ bit];
    }
    // table[s] is now the sum over z in s; reindex by tau = complement(s).
    std::vector<double> cond(corners);
    for (std::size_t tau = 0; tau < corners; ++tau) {
      const std::size_t free = full ^ tau;
      cond[tau] = table[free] / static_cast<double>(std::size_t{1} << std::popcount(free));
    }
    for (int k = 0; k < dims; ++k) {
      const std::size_t bit = std::size_t{1} << k;
      for (std::size_t s = 0; s < corners; ++s)
        if (s & bit) cond[s] -= cond[s ^ bit];
    }
    for (std::size_t kappa = 1; kappa < corners; ++kappa)
      out.partial_variance[kappa] += cond[kappa] * cond[kappa];
  }
  for (double& v : out.partial_variance) v /= static_cast<double>(corners);

  out.first_order = Eigen::VectorXd::Zero(dims);
  out.total = Eigen::VectorXd::Zero(dims);
  if (out.variance > 0.0) {
    for (int k = 0; k < dims; ++k) {
      const std::size_t bit = std::size_t{1} << k;
      out.first_order[k] = out.partial_variance[bit] / out.variance;
      for (std::size_t kappa = 1; kappa < corners; ++kappa)
        if (kappa & bit) out.total[k] += out.partial_variance[kappa] / out.variance;
    }
  }
  return out;
}

}  // namespace wcam
