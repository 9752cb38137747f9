#include <algorithm>
#include <cmath>
#include <vector>

#include "fieldvision/imgproc.hpp"

namespace fv {
namespace {

std::vector<float> gaussian_smooth(const Image& gray, double sigma) {
  const int w = gray.width, h = gray.height;
  std::vector<float> out(static_cast<size_t>(w) * h);
  for (size_t i = 0; i < out.size(); ++i) out[i] = gray.data[i];
  if (sigma <= 0.0) return out;

  const int radius = std::max(1, static_cast<int>(std::ceil(2.5 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  float ksum = 0.0f;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = static_cast<float>(std::exp(-0.5 * i * i / (sigma * sigma)));
    ksum += kernel[i + radius];
  }
  for (float& k : kernel) k /= ksum;

  std::vector<float> tmp(out.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * out[static_cast<size_t>(y) * w + std::clamp(x + k, 0, w - 1)];
      tmp[static_cast<size_t>(y) * w + x] = acc;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float acc = 0.0f;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * tmp[static_cast<size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
      out[static_cast<size_t>(y) * w + x] = acc;
    }
  return out;
}

}  // namespace

Image canny(const Image& gray, const CannyParams& params) {
  if (gray.channels() != 1) throw ShapeError("canny: single-channel input required");
  if (!(params.low > 0.0 && params.low < params.high))
    throw ConfigError("canny: thresholds must satisfy 0 < low < high");

  const int w = gray.width, h = gray.height;
  const std::vector<float> smooth = gaussian_smooth(gray, params.sigma);

  std::vector<float> mag(static_cast<size_t>(w) * h, 0.0f);
  std::vector<uint8_t> dir(static_cast<size_t>(w) * h, 0);
  auto px = [&](int x, int y) {
    return smooth[static_cast<size_t>(std::clamp(y, 0, h - 1)) * w + std::clamp(x, 0, w - 1)];
  };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float gx = (px(x + 1, y - 1) + 2.0f * px(x + 1, y) + px(x + 1, y + 1)) -
                       (px(x - 1, y - 1) + 2.0f * px(x - 1, y) + px(x - 1, y + 1));
      const float gy = (px(x - 1, y + 1) + 2.0f * px(x, y + 1) + px(x + 1, y + 1)) -
                       (px(x - 1, y - 1) + 2.0f * px(x, y - 1) + px(x + 1, y - 1));
      const size_t i = static_cast<size_t>(y) * w + x;
      mag[i] = std::hypot(gx, gy);
      // Quantize the gradient direction into 4 sectors:
      // 0 = horizontal gradient (vertical edge), 1 = 45, 2 = vertical, 3 = 135.
      float angle = std::atan2(gy, gx);
      if (angle < 0.0f) angle += static_cast<float>(M_PI);
      const int sector = static_cast<int>(std::floor(angle / M_PI * 4.0f + 0.5f)) & 3;
      dir[i] = static_cast<uint8_t>(sector);
    }
  }

  // Non-maximum suppression along the gradient direction. Ties are broken
  // asymmetrically (strictly greater on one side) so a plateau keeps one ridge.
  static const int off[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
  std::vector<uint8_t> state(static_cast<size_t>(w) * h, 0);  // 0 none, 1 weak, 2 strong
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t i = static_cast<size_t>(y) * w + x;
      if (mag[i] < params.low) continue;
      const int dx = off[dir[i]][0], dy = off[dir[i]][1];
      const int xa = x + dx, ya = y + dy, xb = x - dx, yb = y - dy;
      const float ma = (xa >= 0 && ya >= 0 && xa < w && ya < h)
                           ? mag[static_cast<size_t>(ya) * w + xa] : 0.0f;
      const float mb = (xb >= 0 && yb >= 0 && xb < w && yb < h)
                           ? mag[static_cast<size_t>(yb) * w + xb] : 0.0f;
      if (mag[i] > ma && mag[i] >= mb)
        state[i] = mag[i] >= params.high ? 2 : 1;
    }
  }

  // Hysteresis: keep weak edges 8-connected to a strong edge.
  Image edges(w, h, PixelFormat::binary);
  std::vector<PixelCoord> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (state[static_cast<size_t>(y) * w + x] == 2) {
        edges.at(x, y) = 255;
        stack.push_back({x, y});
      }
  while (!stack.empty()) {
    const PixelCoord p = stack.back();
    stack.pop_back();
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int nx = p.x + dx, ny = p.y + dy;
        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
        const size_t i = static_cast<size_t>(ny) * w + nx;
        if (state[i] == 1 && edges.at(nx, ny) == 0) {
          edges.at(nx, ny) = 255;
          stack.push_back({nx, ny});
        }
      }
  }
  return edges;
}

}  // namespace fv
