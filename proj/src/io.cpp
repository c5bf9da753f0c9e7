#include "wcam/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <png.h>

namespace wcam::io {

Image load_image(const std::string& path, int side) {
  cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image '" + path + "'");
  if (side > 0 && (bgr.rows != side || bgr.cols != side))
    cv::resize(bgr, bgr, cv::Size(side, side), 0.0, 0.0, cv::INTER_LINEAR);
  Image image(bgr.rows, bgr.cols, 3);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c)
      for (int ch = 0; ch < 3; ++ch) image[static_cast<std::size_t>(ch)](r, c) = row[c][2 - ch] / 255.0;
  }
  return image;
}

Rgb8 to_rgb8(const Image& image) {
  check_consistent(image);
  if (image.channel_count() != 1 && image.channel_count() != 3)
    throw ShapeError("only 1- or 3-channel images can be rendered");
  Rgb8 out{static_cast<int>(image.cols()), static_cast<int>(image.rows()), {}};
  out.pixels.reserve(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height) * 3);
  for (Eigen::Index r = 0; r < image.rows(); ++r)
    for (Eigen::Index c = 0; c < image.cols(); ++c)
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double v = image[image.channel_count() == 1 ? 0 : ch](r, c);
        out.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
      }
  return out;
}

Rgb8 render_heatmap(const Grid& grid, int cell, const std::optional<WaveletSpec>& subbands) {
  if (grid.size() == 0 || cell < 1) throw InvalidParam("render_heatmap: empty grid or cell size");
  const double top = std::max(0.0, grid.maxCoeff());
  cv::Mat levels(static_cast<int>(grid.rows()), static_cast<int>(grid.cols()), CV_8UC1);
  for (int r = 0; r < levels.rows; ++r)
    for (int c = 0; c < levels.cols; ++c) {
      const double v = top > 0.0 ? std::max(0.0, grid(r, c)) / top : 0.0;
      levels.at<std::uint8_t>(r, c) = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
  cv::Mat big;
  cv::resize(levels, big, cv::Size(levels.cols * cell, levels.rows * cell), 0.0, 0.0, cv::INTER_NEAREST);
  cv::Mat bgr;
  cv::applyColorMap(big, bgr, cv::COLORMAP_VIRIDIS);

  if (subbands) {
    const cv::Scalar white(255, 255, 255);
    for (const SubbandId id : subbands_coarse_to_fine(*subbands)) {
      const Region r = subband_region(*subbands, grid.rows(), grid.cols(), id);
      cv::rectangle(bgr, cv::Point(static_cast<int>(r.col0) * cell, static_cast<int>(r.row0) * cell),
                    cv::Point(static_cast<int>(r.col1) * cell - 1, static_cast<int>(r.row1) * cell - 1), white, 1);
    }
  }

  Rgb8 out{bgr.cols, bgr.rows, {}};
  out.pixels.reserve(static_cast<std::size_t>(bgr.total()) * 3);
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c)
      for (int ch = 2; ch >= 0; --ch) out.pixels.push_back(row[c][ch]);
  }
  return out;
}

void write_png(const std::string& path, const Rgb8& image, const std::map<std::string, std::string>& text) {
  if (image.pixels.size() != static_cast<std::size_t>(image.width) * static_cast<std::size_t>(image.height) * 3)
    throw ShapeError("write_png: pixel buffer does not match the image size");
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw IoError("cannot open '" + path + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  // Everything libpng needs must outlive the longjmp target.
  std::vector<png_text> chunks;
  std::vector<png_bytep> rows(static_cast<std::size_t>(image.height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to encode '" + path + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  for (const auto& [key, value] : text) {
    png_text chunk{};
    chunk.compression = PNG_TEXT_COMPRESSION_NONE;
    chunk.key = const_cast<char*>(key.c_str());
    chunk.text = const_cast<char*>(value.c_str());
    chunk.text_length = value.size();
    chunks.push_back(chunk);
  }
  if (!chunks.empty()) png_set_text(png, info, chunks.data(), static_cast<int>(chunks.size()));
  // No timestamps or other varying metadata: identical input gives identical bytes.
  png_write_info(png, info);
  for (int r = 0; r < image.height; ++r)
    rows[static_cast<std::size_t>(r)] =
        const_cast<png_bytep>(image.pixels.data() + static_cast<std::size_t>(r) * static_cast<std::size_t>(image.width) * 3);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

std::string format_double(double value) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string grid_csv(const Grid& grid, const std::string& comment) {
  std::string out;
  if (!comment.empty()) {
    if (comment.find('\n') != std::string::npos) throw InvalidParam("CSV comment must be a single line");
    out += "# " + comment + "\n";
  }
  for (Eigen::Index r = 0; r < grid.rows(); ++r) {
    for (Eigen::Index c = 0; c < grid.cols(); ++c) {
      if (c > 0) out += ',';
      out += format_double(grid(r, c));
    }
    out += '\n';
  }
  return out;
}

void write_grid_csv(const std::string& path, const Grid& grid, const std::string& comment) {
  write_text(path, grid_csv(grid, comment));
}

Grid read_grid_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> values;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError("'" + path + "': bad number '" + cell + "'");
      }
    }
    if (!rows.empty() && values.size() != rows.front().size()) throw IoError("'" + path + "': ragged rows");
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw IoError("'" + path + "' holds no values");
  Grid grid(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      grid(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return grid;
}

void write_text(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  if (!out.flush()) throw IoError("failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace wcam::io
