#include <algorithm>
#include <cmath>
#include <vector>

#include "fieldvision/imgproc.hpp"

namespace fv {

HogDescriptor hog_descriptor(const Image& patch, const HogLayout& layout) {
  if (patch.channels() != 1) throw ShapeError("hog_descriptor: gray input required");
  if (layout.cell_size <= 0 || layout.bins <= 0) throw ConfigError("hog: bad layout");
  if (patch.width % layout.cell_size != 0 || patch.height % layout.cell_size != 0)
    throw ShapeError("hog_descriptor: patch dimensions not divisible by cell size");

  HogDescriptor desc;
  desc.cells_x = patch.width / layout.cell_size;
  desc.cells_y = patch.height / layout.cell_size;
  desc.bins = layout.bins;
  desc.values.assign(static_cast<size_t>(desc.cells_x) * desc.cells_y * desc.bins, 0.0);

  const double bin_width = 180.0 / layout.bins;
  auto px = [&patch](int x, int y) {
    return static_cast<double>(
        patch.at(std::clamp(x, 0, patch.width - 1), std::clamp(y, 0, patch.height - 1)));
  };

  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) {
      const double gx = px(x + 1, y) - px(x - 1, y);
      const double gy = px(x, y + 1) - px(x, y - 1);
      const double mag = std::hypot(gx, gy);
      if (mag <= 0.0) continue;
      // Unsigned orientation in [0, 180).
      double ang = std::atan2(gy, gx) * 180.0 / M_PI;
      if (ang < 0.0) ang += 180.0;
      if (ang >= 180.0) ang -= 180.0;

      // Bilinear vote between the two nearest orientation bins.
      const double pos = ang / bin_width - 0.5;
      int b0 = static_cast<int>(std::floor(pos));
      const double frac = pos - b0;
      int b1 = b0 + 1;
      if (b0 < 0) b0 += layout.bins;
      if (b1 >= layout.bins) b1 -= layout.bins;

      const int cx = x / layout.cell_size, cy = y / layout.cell_size;
      double* cell =
          &desc.values[(static_cast<size_t>(cy) * desc.cells_x + cx) * layout.bins];
      cell[b0] += mag * (1.0 - frac);
      cell[b1] += mag * frac;
    }
  }

  // Per-cell L2 normalization; empty cells stay zero.
  for (int c = 0; c < desc.cells_x * desc.cells_y; ++c) {
    double* cell = &desc.values[static_cast<size_t>(c) * layout.bins];
    double norm2 = 0.0;
    for (int b = 0; b < layout.bins; ++b) norm2 += cell[b] * cell[b];
    if (norm2 > 0.0) {
      const double inv = 1.0 / std::sqrt(norm2);
      for (int b = 0; b < layout.bins; ++b) cell[b] *= inv;
    }
  }
  return desc;
}

}  // namespace fv
