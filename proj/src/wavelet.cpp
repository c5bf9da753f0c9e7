#include "wcam/wavelet.hpp"

#include <cmath>

namespace wcam {

namespace {

FilterBank make_bank(std::vector<double> low) {
  FilterBank bank;
  const std::size_t n = low.size();
  bank.high.resize(n);
  for (std::size_t k = 0; k < n; ++k) bank.high[k] = (k % 2 == 0 ? 1.0 : -1.0) * low[n - 1 - k];
  bank.low = std::move(low);
  return bank;
}

}  // namespace

std::string to_string(WaveletFamily family) {
  switch (family) {
    case WaveletFamily::Haar: return "haar";
    case WaveletFamily::Daubechies4: return "d4";
  }
  return "unknown";
}

WaveletFamily parse_wavelet_family(const std::string& name) {
  if (name == "haar") return WaveletFamily::Haar;
  if (name == "d4" || name == "daubechies4") return WaveletFamily::Daubechies4;
  throw InvalidParam("unknown wavelet family '" + name + "' (expected haar or d4)");
}

const FilterBank& filter_bank(WaveletFamily family) {
  static const FilterBank haar = make_bank({M_SQRT1_2, M_SQRT1_2});
  // Daubechies' four-tap filter (two vanishing moments).
  static const FilterBank d4 = [] {
    const double s3 = std::sqrt(3.0);
    const double norm = 4.0 * M_SQRT2;
    return make_bank({(1 + s3) / norm, (3 + s3) / norm, (3 - s3) / norm, (1 - s3) / norm});
  }();
  switch (family) {
    case WaveletFamily::Haar: return haar;
    case WaveletFamily::Daubechies4: return d4;
  }
  throw InvalidParam("unknown wavelet family");
}

void validate_wavelet_shape(Eigen::Index rows, Eigen::Index cols, const WaveletSpec& spec) {
  if (spec.levels < 1) throw InvalidParam("wavelet levels must be >= 1");
  if (spec.levels > 30) throw InvalidParam("wavelet levels must be <= 30");
  const Eigen::Index step = Eigen::Index{1} << spec.levels;
  if (rows <= 0 || cols <= 0 || rows % step != 0 || cols % step != 0)
    throw ShapeError("shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " is not divisible by 2^levels = " + std::to_string(step));
}

Region subband_region(const WaveletSpec& spec, Eigen::Index rows, Eigen::Index cols, SubbandId id) {
  if (id.level < 0 || id.level > spec.levels)
    throw InvalidSubband("subband level " + std::to_string(id.level) + " outside [0, " +
                         std::to_string(spec.levels) + "]");
  if ((id.level == 0) != (id.orientation == Orientation::Approx))
    throw InvalidSubband("orientation Approx is valid exactly at level 0");
  validate_wavelet_shape(rows, cols, spec);

  if (id.level == 0) return {0, 0, rows >> spec.levels, cols >> spec.levels};
  const Eigen::Index hr = rows >> id.level;
  const Eigen::Index hc = cols >> id.level;
  switch (id.orientation) {
    case Orientation::Horizontal: return {0, hc, hr, 2 * hc};
    case Orientation::Vertical: return {hr, 0, 2 * hr, hc};
    case Orientation::Diagonal: return {hr, hc, 2 * hr, 2 * hc};
    case Orientation::Approx: break;
  }
  throw InvalidSubband("invalid orientation");
}

std::vector<SubbandId> subbands_coarse_to_fine(const WaveletSpec& spec) {
  std::vector<SubbandId> ids;
  ids.reserve(static_cast<std::size_t>(1 + 3 * spec.levels));
  ids.push_back({0, Orientation::Approx});
  for (int level = spec.levels; level >= 1; --level) {
    ids.push_back({level, Orientation::Horizontal});
    ids.push_back({level, Orientation::Vertical});
    ids.push_back({level, Orientation::Diagonal});
  }
  return ids;
}

std::string subband_label(SubbandId id) {
  switch (id.orientation) {
    case Orientation::Approx: return "a";
    case Orientation::Horizontal: return "h" + std::to_string(id.level);
    case Orientation::Vertical: return "v" + std::to_string(id.level);
    case Orientation::Diagonal: return "d" + std::to_string(id.level);
  }
  return "?";
}

}  // namespace wcam
