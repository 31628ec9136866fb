#pragma once

// 8-bit RGB morphology images: composition rendering, PNG I/O and the
// resample-and-flatten feature extraction used by the clustering pipeline.

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "ternblend/grid.hpp"

namespace ternblend {

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB, row 0 first

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {
    if (w <= 0 || h <= 0) throw std::invalid_argument("image: dimensions must be positive");
  }

  bool empty() const { return width <= 0 || height <= 0 || pixels.empty(); }

  std::uint8_t& at(int x, int y, int ch) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }
  std::uint8_t at(int x, int y, int ch) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + ch];
  }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(v, 0.0, 1.0)));
}

/// R, G, B carry a, b, c. Image row 0 is the top of the domain (largest y).
inline RgbImage render_rgb(const FieldPair& f) {
  f.validate();
  const GridSpec& g = f.grid();
  RgbImage img(g.nx, g.ny);
  for (int row = 0; row < g.ny; ++row) {
    const int j = g.ny - 1 - row;
    for (int i = 0; i < g.nx; ++i) {
      const double a = f.a(i, j);
      const double b = f.b(i, j);
      img.at(i, row, 0) = to_byte(a);
      img.at(i, row, 1) = to_byte(b);
      img.at(i, row, 2) = to_byte(1.0 - a - b);
    }
  }
  return img;
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
  if (img.empty()) throw std::invalid_argument("write_png: empty image");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  desc.width = static_cast<png_uint_32>(img.width);
  desc.height = static_cast<png_uint_32>(img.height);
  desc.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&desc, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw std::runtime_error("write_png '" + path.string() + "': " + msg);
  }
}

inline RgbImage read_png(const std::filesystem::path& path) {
  png_image desc{};
  desc.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&desc, path.string().c_str())) {
    throw std::runtime_error("read_png '" + path.string() + "': " + desc.message);
  }
  desc.format = PNG_FORMAT_RGB;
  RgbImage img(static_cast<int>(desc.width), static_cast<int>(desc.height));
  if (!png_image_finish_read(&desc, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = desc.message;
    png_image_free(&desc);
    throw std::runtime_error("read_png '" + path.string() + "': " + msg);
  }
  return img;
}

/// Bilinear resampling with pixel centres aligned (an exact 2:1 reduction
/// averages 2x2 blocks); edge samples are clamped. Returns the three channel
/// planes, row-major, in [0, 255] without rounding.
inline std::vector<double> resample_planes(const RgbImage& src, int width, int height) {
  if (src.empty()) throw std::invalid_argument("resample: empty image");
  if (width <= 0 || height <= 0) throw std::invalid_argument("resample: bad target size");
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  std::vector<double> out(3 * plane);
  const double sx = static_cast<double>(src.width) / width;
  const double sy = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, src.height - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, src.width - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = (1.0 - wx) * src.at(x0, y0, ch) + wx * src.at(x1, y0, ch);
        const double bot = (1.0 - wx) * src.at(x0, y1, ch) + wx * src.at(x1, y1, ch);
        out[ch * plane + static_cast<std::size_t>(y) * width + x] = (1.0 - wy) * top + wy * bot;
      }
    }
  }
  return out;
}

inline RgbImage resample_bilinear(const RgbImage& src, int width, int height) {
  const std::vector<double> planes = resample_planes(src, width, height);
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  RgbImage out(width, height);
  for (std::size_t k = 0; k < plane; ++k) {
    for (int ch = 0; ch < 3; ++ch) {
      out.pixels[k * 3 + ch] =
          static_cast<std::uint8_t>(std::clamp(std::lround(planes[ch * plane + k]), 0L, 255L));
    }
  }
  return out;
}

/// Resample to width x height, then concatenate the three channel planes
/// (row-major, scaled to [0, 1]): length 3 * width * height.
inline std::vector<double> preprocess(const RgbImage& img, int width = 200, int height = 200) {
  if (img.empty()) throw std::invalid_argument("preprocess: empty image");
  std::vector<double> out = resample_planes(img, width, height);
  for (double& v : out) v /= 255.0;
  return out;
}

/// Distinct, fixed colours for label maps and scatter plots.
inline std::array<std::uint8_t, 3> palette_color(int label) {
  static constexpr std::array<std::array<std::uint8_t, 3>, 12> kPalette{{
      {31, 119, 180}, {255, 127, 14}, {44, 160, 44}, {214, 39, 40},
      {148, 103, 189}, {140, 86, 75}, {227, 119, 194}, {127, 127, 127},
      {188, 189, 34}, {23, 190, 207}, {0, 0, 128}, {128, 128, 0},
  }};
  if (label < 0) return {255, 255, 255};
  return kPalette[static_cast<std::size_t>(label) % kPalette.size()];
}

}  // namespace ternblend
