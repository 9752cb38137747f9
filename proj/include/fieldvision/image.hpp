#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fieldvision/error.hpp"

namespace fv {

enum class PixelFormat : uint8_t { rgb8, hsv8, gray8, binary };

inline int channel_count(PixelFormat f) {
  return (f == PixelFormat::rgb8 || f == PixelFormat::hsv8) ? 3 : 1;
}

// Row-major 8-bit image. Binary images use 0 / 255.
struct Image {
  int width = 0;
  int height = 0;
  PixelFormat format = PixelFormat::gray8;
  std::vector<uint8_t> data;

  Image() = default;
  Image(int w, int h, PixelFormat f, uint8_t fill = 0) : width(w), height(h), format(f) {
    if (w < 8 || h < 8) throw ShapeError("image: dimensions must be at least 8x8");
    data.assign(static_cast<size_t>(w) * h * channel_count(f), fill);
  }

  int channels() const { return channel_count(format); }
  size_t pixel_count() const { return static_cast<size_t>(width) * height; }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<size_t>(y) * width + x) * channels() + c];
  }
  uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<size_t>(y) * width + x) * channels() + c];
  }
};

// Classification labels produced by color segmentation.
enum class Label : uint8_t { other = 0, green = 1, white = 2 };

inline Label label_at(const Image& labels, int x, int y) {
  return static_cast<Label>(labels.at(x, y));
}

// Binary portable pixmap I/O (P6 for rgb8, P5 for single-channel), maxval 255.
void write_pnm(const Image& img, const std::string& path);
Image read_pnm(const std::string& path);

}  // namespace fv
