#include "wcam/qmc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "wcam/detail/sobol_directions.hpp"
#include "wcam/errors.hpp"
#include "wcam/random.hpp"

namespace wcam {

namespace {

const std::vector<std::size_t>& initial_number_offsets() {
  static const std::vector<std::size_t> offsets = [] {
    std::vector<std::size_t> out(detail::kSobolMaxDimension + 1, 0);
    for (std::size_t d = 0; d < detail::kSobolMaxDimension; ++d) {
      const std::uint32_t poly = detail::kSobolPolynomials[d];
      const std::size_t degree = poly > 0 ? static_cast<std::size_t>(std::bit_width(poly) - 1) : 0;
      out[d + 1] = out[d] + degree;
    }
    return out;
  }();
  return offsets;
}

std::uint32_t reverse_bits(std::uint32_t x) {
  x = ((x >> 1) & 0x55555555u) | ((x & 0x55555555u) << 1);
  x = ((x >> 2) & 0x33333333u) | ((x & 0x33333333u) << 2);
  x = ((x >> 4) & 0x0f0f0f0fu) | ((x & 0x0f0f0f0fu) << 4);
  x = ((x >> 8) & 0x00ff00ffu) | ((x & 0x00ff00ffu) << 8);
  return (x >> 16) | (x << 16);
}

std::uint32_t laine_karras_permutation(std::uint32_t x, std::uint32_t seed) {
  x += seed;
  x ^= x * 0x6c50b47cu;
  x ^= x * 0xb82f1e52u;
  x ^= x * 0xc7afe638u;
  x ^= x * 0x8d22f6e6u;
  return x;
}

std::uint32_t dimension_seed(std::uint64_t seed, std::size_t dim) {
  return static_cast<std::uint32_t>(splitmix64(splitmix64(seed) ^ (0x632be59bd9b4e019ULL * (dim + 1))));
}

Eigen::MatrixXd sobol_points(std::uint64_t seed, Eigen::Index n, Eigen::Index dim) {
  const SobolSequence sequence(static_cast<std::size_t>(dim));
  const auto raw = sequence.integer_points(static_cast<std::size_t>(n));
  Eigen::MatrixXd out(n, dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const std::uint32_t dseed = dimension_seed(seed, static_cast<std::size_t>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
      const std::uint32_t x = raw[static_cast<std::size_t>(i * dim + d)];
      out(i, d) = static_cast<double>(nested_uniform_scramble(x, dseed)) * 0x1.0p-32;
    }
  }
  return out;
}

// Halton with random affine digit scrambling (Matousek): digit a at position
// i maps to (m_i * a + s_i) mod p, m_i != 0.
Eigen::MatrixXd halton_points(std::uint64_t seed, Eigen::Index n, Eigen::Index dim) {
  const auto primes = first_primes(static_cast<std::size_t>(dim));
  Rng rng(seed);
  Eigen::MatrixXd out(n, dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const std::uint64_t base = primes[static_cast<std::size_t>(d)];
    const int digits = std::max(1, static_cast<int>(std::ceil(53.0 / std::log2(static_cast<double>(base)))));
    std::vector<std::uint64_t> mult(static_cast<std::size_t>(digits));
    std::vector<std::uint64_t> shift(static_cast<std::size_t>(digits));
    for (int i = 0; i < digits; ++i) {
      mult[static_cast<std::size_t>(i)] = 1 + uniform_below(rng, base - 1);
      shift[static_cast<std::size_t>(i)] = uniform_below(rng, base);
    }
    const double inv_base = 1.0 / static_cast<double>(base);
    for (Eigen::Index i = 0; i < n; ++i) {
      auto index = static_cast<std::uint64_t>(i);
      double value = 0.0;
      double scale = inv_base;
      for (int k = 0; k < digits; ++k) {
        const std::uint64_t digit = index % base;
        index /= base;
        const auto ku = static_cast<std::size_t>(k);
        value += static_cast<double>((mult[ku] * digit + shift[ku]) % base) * scale;
        scale *= inv_base;
      }
      out(i, d) = std::min(value, 1.0);
    }
  }
  return out;
}

Eigen::MatrixXd latin_hypercube_points(std::uint64_t seed, Eigen::Index n, Eigen::Index dim) {
  Rng rng(seed);
  Eigen::MatrixXd out(n, dim);
  std::vector<Eigen::Index> strata(static_cast<std::size_t>(n));
  for (Eigen::Index d = 0; d < dim; ++d) {
    for (Eigen::Index i = 0; i < n; ++i) strata[static_cast<std::size_t>(i)] = i;
    shuffle(std::span<Eigen::Index>(strata), rng);
    for (Eigen::Index i = 0; i < n; ++i) {
      out(i, d) = (static_cast<double>(strata[static_cast<std::size_t>(i)]) + uniform01(rng)) /
                  static_cast<double>(n);
    }
  }
  return out;
}

Eigen::MatrixXd monte_carlo_points(std::uint64_t seed, Eigen::Index n, Eigen::Index dim) {
  Rng rng(seed);
  Eigen::MatrixXd out(n, dim);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index d = 0; d < dim; ++d) out(i, d) = uniform01(rng);
  return out;
}

}  // namespace

std::string to_string(Sampler sampler) {
  switch (sampler) {
    case Sampler::SobolSequence: return "sobol";
    case Sampler::Halton: return "halton";
    case Sampler::LatinHypercube: return "lhs";
    case Sampler::MonteCarlo: return "montecarlo";
  }
  return "unknown";
}

Sampler parse_sampler(const std::string& name) {
  if (name == "sobol") return Sampler::SobolSequence;
  if (name == "halton") return Sampler::Halton;
  if (name == "lhs" || name == "latin") return Sampler::LatinHypercube;
  if (name == "montecarlo" || name == "mc") return Sampler::MonteCarlo;
  throw InvalidParam("unknown sampler '" + name + "' (expected sobol, halton, lhs or montecarlo)");
}

SobolSequence::SobolSequence(std::size_t dimensions) {
  if (dimensions > max_dimensions())
    throw InvalidParam("Sobol sequence supports at most " + std::to_string(max_dimensions()) +
                       " dimensions, requested " + std::to_string(dimensions));
  const auto& offsets = initial_number_offsets();
  directions_.resize(dimensions);
  for (std::size_t d = 0; d < dimensions; ++d) {
    std::array<std::uint32_t, 32> m{};
    if (d == 0) {
      m.fill(1);
    } else {
      const std::uint32_t poly = detail::kSobolPolynomials[d];
      const std::size_t degree = offsets[d + 1] - offsets[d];
      for (std::size_t j = 0; j < degree; ++j) m[j] = detail::kSobolInitialNumbers[offsets[d] + j];
      for (std::size_t j = degree; j < 32; ++j) {
        std::uint32_t value = m[j - degree];
        for (std::size_t k = 0; k < degree; ++k) {
          if ((poly >> (degree - 1 - k)) & 1u) value ^= m[j - k - 1] << (k + 1);
        }
        m[j] = value;
      }
    }
    for (std::size_t j = 0; j < 32; ++j) directions_[d][j] = m[j] << (31 - j);
  }
}

std::size_t SobolSequence::max_dimensions() { return detail::kSobolMaxDimension; }

std::vector<std::uint32_t> SobolSequence::integer_points(std::size_t n) const {
  const std::size_t dims = dimensions();
  if (n > (std::size_t{1} << 32)) throw InvalidParam("Sobol sequence limited to 2^32 points");
  std::vector<std::uint32_t> out(n * dims, 0);
  std::vector<std::uint32_t> state(dims, 0);
  for (std::size_t i = 1; i < n; ++i) {
    const auto bit = static_cast<std::size_t>(std::countr_zero(i));
    for (std::size_t d = 0; d < dims; ++d) {
      state[d] ^= directions_[d][bit];
      out[i * dims + d] = state[d];
    }
  }
  return out;
}

Eigen::MatrixXd SobolSequence::points(std::size_t n) const {
  const auto raw = integer_points(n);
  const auto dims = static_cast<Eigen::Index>(dimensions());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), dims);
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index d = 0; d < dims; ++d)
      out(i, d) = static_cast<double>(raw[static_cast<std::size_t>(i * dims + d)]) * 0x1.0p-32;
  return out;
}

std::uint32_t nested_uniform_scramble(std::uint32_t x, std::uint32_t seed) {
  return reverse_bits(laine_karras_permutation(reverse_bits(x), seed));
}

Eigen::MatrixXd draw_points(const SamplerKind& kind, Eigen::Index n, Eigen::Index dim) {
  if (n < 1 || dim < 1) throw InvalidParam("draw_points: n and dim must be positive");
  switch (kind.sampler) {
    case Sampler::SobolSequence: return sobol_points(kind.seed, n, dim);
    case Sampler::Halton: return halton_points(kind.seed, n, dim);
    case Sampler::LatinHypercube: return latin_hypercube_points(kind.seed, n, dim);
    case Sampler::MonteCarlo: return monte_carlo_points(kind.seed, n, dim);
  }
  throw InvalidParam("unknown sampler");
}

DesignMatrices draw_design(const SamplerKind& kind, Eigen::Index n_design, Eigen::Index dim) {
  if (n_design < 2) throw InvalidParam("number of designs must be >= 2");
  if (dim < 1) throw InvalidParam("design dimension must be >= 1");
  const Eigen::MatrixXd points = draw_points(kind, n_design, 2 * dim);
  return {points.leftCols(dim), points.rightCols(dim)};
}

Eigen::MatrixXd pivot_columns(const DesignMatrices& design, Eigen::Index k) {
  if (k < 0 || k >= design.dim())
    throw IndexError("pivot column " + std::to_string(k) + " outside [0, " +
                     std::to_string(design.dim()) + ")");
  Eigen::MatrixXd c = design.A;
  c.col(k) = design.B.col(k);
  return c;
}

double star_discrepancy_1d(std::span<const double> samples) {
  if (samples.empty()) throw InvalidParam("star_discrepancy_1d: no samples");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double mid = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * n);
    worst = std::max(worst, std::abs(sorted[i] - mid));
  }
  return worst + 1.0 / (2.0 * n);
}

std::vector<std::uint32_t> first_primes(std::size_t n) {
  std::vector<std::uint32_t> primes;
  if (n == 0) return primes;
  // p_n < n (ln n + ln ln n) for n >= 6.
  const double nd = static_cast<double>(std::max<std::size_t>(n, 6));
  const auto limit = static_cast<std::size_t>(nd * (std::log(nd) + std::log(std::log(nd)))) + 16;
  std::vector<bool> composite(limit + 1, false);
  for (std::size_t i = 2; i <= limit && primes.size() < n; ++i) {
    if (composite[i]) continue;
    primes.push_back(static_cast<std::uint32_t>(i));
    for (std::size_t j = i * i; j <= limit; j += i) composite[j] = true;
  }
  return primes;
}

}  // namespace wcam
