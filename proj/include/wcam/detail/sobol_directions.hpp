#ifndef WCAM_DETAIL_SOBOL_DIRECTIONS_HPP
#define WCAM_DETAIL_SOBOL_DIRECTIONS_HPP

#include <cstddef>
#include <cstdint>

namespace wcam::detail {

inline constexpr std::size_t kSobolMaxDimension = 21201;

// Primitive polynomials with leading and trailing bits, so the degree of
// dimension d is floor(log2(kSobolPolynomials[d])).
extern const std::uint32_t kSobolPolynomials[kSobolMaxDimension];

// Initial direction numbers m_1..m_s of every dimension, concatenated.
extern const std::uint32_t kSobolInitialNumbers[];

}  // namespace wcam::detail

#endif  // WCAM_DETAIL_SOBOL_DIRECTIONS_HPP
