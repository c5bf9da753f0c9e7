#ifndef WCAM_IO_HPP
#define WCAM_IO_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "wcam/grid.hpp"
#include "wcam/image.hpp"
#include "wcam/wavelet.hpp"

namespace wcam::io {

/// Reads a PNG/JPEG as RGB in [0, 1]. A positive `side` resizes it
/// bilinearly to side x side. Throws IoError if the file cannot be decoded.
Image load_image(const std::string& path, int side = 0);

struct Rgb8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB
};

/// 8-bit rendering of an image in [0, 1]; one or three channels.
Rgb8 to_rgb8(const Image& image);

/// Viridis rendering of a grid, `cell` pixels per cell. Negative values are
/// shown as 0 and the colour scale runs from 0 to the grid maximum. With a
/// wavelet spec, subband borders are drawn in white.
Rgb8 render_heatmap(const Grid& grid, int cell, const std::optional<WaveletSpec>& subbands = std::nullopt);

/// Writes an 8-bit RGB PNG with the given tEXt chunks.
void write_png(const std::string& path, const Rgb8& image, const std::map<std::string, std::string>& text = {});

/// Shortest round-trippable form with 17 significant digits.
std::string format_double(double value);

/// Grid as CSV: an optional "# <comment>" first line, then one row per grid
/// row with values in 17 significant digits.
std::string grid_csv(const Grid& grid, const std::string& comment = "");
void write_grid_csv(const std::string& path, const Grid& grid, const std::string& comment = "");
Grid read_grid_csv(const std::string& path);

void write_text(const std::string& path, const std::string& contents);
std::string read_text(const std::string& path);

}  // namespace wcam::io

#endif  // WCAM_IO_HPP
