#include "fieldvision/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace fv {

// ---------------------------------------------------------------- color

Image rgb_to_hsv(const Image& rgb) {
  if (rgb.format != PixelFormat::rgb8) throw ShapeError("rgb_to_hsv: rgb8 input required");
  Image hsv(rgb.width, rgb.height, PixelFormat::hsv8);
  const size_t n = rgb.pixel_count();
  for (size_t i = 0; i < n; ++i) {
    const int r = rgb.data[i * 3], g = rgb.data[i * 3 + 1], b = rgb.data[i * 3 + 2];
    const int maxc = std::max({r, g, b});
    const int minc = std::min({r, g, b});
    const int delta = maxc - minc;
    int h = 0, s = 0;
    if (delta > 0) {
      double hd;
      if (maxc == r)
        hd = 60.0 * (g - b) / delta;
      else if (maxc == g)
        hd = 120.0 + 60.0 * (b - r) / delta;
      else
        hd = 240.0 + 60.0 * (r - g) / delta;
      if (hd < 0.0) hd += 360.0;
      h = static_cast<int>(std::lround(hd * 0.5)) % 180;
    }
    if (maxc > 0) s = static_cast<int>(std::lround(255.0 * delta / maxc));
    hsv.data[i * 3] = static_cast<uint8_t>(h);
    hsv.data[i * 3 + 1] = static_cast<uint8_t>(std::clamp(s, 0, 255));
    hsv.data[i * 3 + 2] = static_cast<uint8_t>(maxc);
  }
  return hsv;
}

void HsvBox::validate() const {
  if (s_min > s_max || v_min > v_max) throw ConfigError("hsv box: min above max");
  if (h_min < 0 || h_max > 179 || s_min < 0 || s_max > 255 || v_min < 0 || v_max > 255)
    throw ConfigError("hsv box: channel bounds out of range");
}

bool HsvBox::contains(uint8_t h, uint8_t s, uint8_t v) const {
  if (s < s_min || s > s_max || v < v_min || v > v_max) return false;
  if (h_min <= h_max) return h >= h_min && h <= h_max;
  return h >= h_min || h <= h_max;  // hue wrap
}

Image classify_colors(const Image& hsv, const ColorThresholds& lut) {
  if (hsv.format != PixelFormat::hsv8) throw ShapeError("classify_colors: hsv8 input required");
  lut.green.validate();
  lut.white.validate();
  Image labels(hsv.width, hsv.height, PixelFormat::gray8);
  const size_t n = hsv.pixel_count();
  for (size_t i = 0; i < n; ++i) {
    const uint8_t h = hsv.data[i * 3], s = hsv.data[i * 3 + 1], v = hsv.data[i * 3 + 2];
    Label l = Label::other;
    if (lut.green.contains(h, s, v))
      l = Label::green;
    else if (lut.white.contains(h, s, v))
      l = Label::white;
    labels.data[i] = static_cast<uint8_t>(l);
  }
  return labels;
}

Image label_mask(const Image& labels, Label which) {
  Image mask(labels.width, labels.height, PixelFormat::binary);
  for (size_t i = 0; i < labels.data.size(); ++i)
    mask.data[i] = labels.data[i] == static_cast<uint8_t>(which) ? 255 : 0;
  return mask;
}

// ---------------------------------------------------------------- regions

std::vector<Component> connected_components(const Image& binary, int connectivity) {
  if (binary.channels() != 1) throw ShapeError("connected_components: single-channel input required");
  if (connectivity != 4 && connectivity != 8)
    throw ConfigError("connected_components: connectivity must be 4 or 8");

  const int w = binary.width, h = binary.height;
  std::vector<int32_t> label(static_cast<size_t>(w) * h, -1);
  std::vector<Component> comps;

  static const int dx8[] = {1, -1, 0, 0, 1, 1, -1, -1};
  static const int dy8[] = {0, 0, 1, -1, 1, -1, 1, -1};
  const int ndirs = connectivity == 4 ? 4 : 8;

  std::vector<PixelCoord> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const size_t idx = static_cast<size_t>(y) * w + x;
      if (binary.data[idx] == 0 || label[idx] >= 0) continue;
      const int32_t id = static_cast<int32_t>(comps.size());
      Component comp;
      comp.min_x = comp.max_x = x;
      comp.min_y = comp.max_y = y;
      stack.clear();
      stack.push_back({x, y});
      label[idx] = id;
      while (!stack.empty()) {
        const PixelCoord p = stack.back();
        stack.pop_back();
        comp.pixels.push_back(p);
        comp.min_x = std::min(comp.min_x, p.x);
        comp.max_x = std::max(comp.max_x, p.x);
        comp.min_y = std::min(comp.min_y, p.y);
        comp.max_y = std::max(comp.max_y, p.y);
        for (int d = 0; d < ndirs; ++d) {
          const int nx = p.x + dx8[d], ny = p.y + dy8[d];
          if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          const size_t nidx = static_cast<size_t>(ny) * w + nx;
          if (binary.data[nidx] != 0 && label[nidx] < 0) {
            label[nidx] = id;
            stack.push_back({nx, ny});
          }
        }
      }
      comps.push_back(std::move(comp));
    }
  }
  std::stable_sort(comps.begin(), comps.end(),
                   [](const Component& a, const Component& b) { return a.area() > b.area(); });
  return comps;
}

std::vector<PixelCoord> outer_contour(const Component& comp, int width, int height) {
  // Work in a padded local window so the exterior is a single flood region.
  const int pad = 1;
  const int w = comp.bbox_width() + 2 * pad, h = comp.bbox_height() + 2 * pad;
  std::vector<uint8_t> inside(static_cast<size_t>(w) * h, 0);
  for (const PixelCoord& p : comp.pixels)
    inside[static_cast<size_t>(p.y - comp.min_y + pad) * w + (p.x - comp.min_x + pad)] = 1;

  // Flood the exterior (4-connected so diagonal pinches stay closed).
  std::vector<uint8_t> exterior(static_cast<size_t>(w) * h, 0);
  std::deque<PixelCoord> queue;
  queue.push_back({0, 0});
  exterior[0] = 1;
  static const int dx[] = {1, -1, 0, 0};
  static const int dy[] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const PixelCoord p = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      const int nx = p.x + dx[d], ny = p.y + dy[d];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const size_t idx = static_cast<size_t>(ny) * w + nx;
      if (!inside[idx] && !exterior[idx]) {
        exterior[idx] = 1;
        queue.push_back({nx, ny});
      }
    }
  }

  std::vector<PixelCoord> contour;
  for (const PixelCoord& p : comp.pixels) {
    const int lx = p.x - comp.min_x + pad, ly = p.y - comp.min_y + pad;
    bool on_border = false;
    for (int d = 0; d < 8 && !on_border; ++d) {
      static const int ddx[] = {1, -1, 0, 0, 1, 1, -1, -1};
      static const int ddy[] = {0, 0, 1, -1, 1, -1, 1, -1};
      const int nx = lx + ddx[d], ny = ly + ddy[d];
      if (exterior[static_cast<size_t>(ny) * w + nx]) on_border = true;
    }
    // Image-border pixels count as outer boundary too.
    if (!on_border && (p.x == 0 || p.y == 0 || p.x == width - 1 || p.y == height - 1))
      on_border = true;
    if (on_border) contour.push_back(p);
  }

  // Order by angle around the centroid; good enough for hull/RDP consumers.
  double cx = 0.0, cy = 0.0;
  for (const PixelCoord& p : contour) {
    cx += p.x;
    cy += p.y;
  }
  if (!contour.empty()) {
    cx /= contour.size();
    cy /= contour.size();
  }
  std::sort(contour.begin(), contour.end(), [cx, cy](const PixelCoord& a, const PixelCoord& b) {
    return std::atan2(a.y - cy, a.x - cx) < std::atan2(b.y - cy, b.x - cx);
  });
  return contour;
}

// ---------------------------------------------------------------- polygons

std::vector<Vec2> convex_hull(std::vector<Vec2> points) {
  if (points.empty()) throw EmptyInputError("convex_hull: no points");
  std::sort(points.begin(), points.end(), [](const Vec2& a, const Vec2& b) {
    return a.x < b.x || (a.x == b.x && a.y < b.y);
  });
  points.erase(std::unique(points.begin(), points.end(),
                           [](const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }),
               points.end());
  const size_t n = points.size();
  if (n <= 2) return points;

  // Andrew monotone chain; strict turns drop collinear vertices.
  auto cross = [](const Vec2& o, const Vec2& a, const Vec2& b) {
    return (a - o).cross(b - o);
  };
  std::vector<Vec2> hull(2 * n);
  size_t k = 0;
  for (size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  for (size_t i = n - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], points[i]) <= 0.0) --k;
    hull[k++] = points[i];
  }
  hull.resize(k - 1);
  return hull;
}

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squared_norm();
  if (len2 <= 0.0) return (p - a).norm();
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return (p - (a + ab * t)).norm();
}

namespace {

void rdp_recurse(const std::vector<Vec2>& pts, size_t first, size_t last, double epsilon,
                 std::vector<bool>& keep) {
  if (last <= first + 1) return;
  double max_d = -1.0;
  size_t max_i = first;
  for (size_t i = first + 1; i < last; ++i) {
    const double d = point_segment_distance(pts[i], pts[first], pts[last]);
    if (d > max_d) {
      max_d = d;
      max_i = i;
    }
  }
  if (max_d > epsilon) {
    keep[max_i] = true;
    rdp_recurse(pts, first, max_i, epsilon, keep);
    rdp_recurse(pts, max_i, last, epsilon, keep);
  }
}

}  // namespace

std::vector<Vec2> rdp_simplify(const std::vector<Vec2>& polyline, double epsilon) {
  if (epsilon <= 0.0) throw ConfigError("rdp_simplify: epsilon must be positive");
  if (polyline.size() < 2) throw InsufficientDataError("rdp_simplify: need at least 2 points");
  std::vector<bool> keep(polyline.size(), false);
  keep.front() = keep.back() = true;
  rdp_recurse(polyline, 0, polyline.size() - 1, epsilon, keep);
  std::vector<Vec2> out;
  for (size_t i = 0; i < polyline.size(); ++i)
    if (keep[i]) out.push_back(polyline[i]);
  return out;
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& polygon) {
  bool inside = false;
  const size_t n = polygon.size();
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = polygon[i];
    const Vec2& b = polygon[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

std::vector<Vec2> densify_polyline(const std::vector<Vec2>& polyline, double step) {
  if (step <= 0.0) throw ConfigError("densify_polyline: step must be positive");
  std::vector<Vec2> out;
  for (size_t i = 0; i + 1 < polyline.size(); ++i) {
    const Vec2& a = polyline[i];
    const Vec2& b = polyline[i + 1];
    const int n = std::max(1, int(std::ceil((b - a).norm() / step)));
    for (int k = 0; k < n; ++k) out.push_back(a + (b - a) * (double(k) / n));
  }
  if (!polyline.empty()) out.push_back(polyline.back());
  return out;
}

namespace {

// Lower envelope of parabolas rooted at (i, f[i]); Felzenszwalb-Huttenlocher.
void squared_dt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
                   std::vector<double>& z) {
  const int n = int(f.size());
  int k = 0;
  v[0] = 0;
  z[0] = -1e30;
  z[1] = 1e30;
  for (int q = 1; q < n; ++q) {
    double s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    while (s <= z[k]) {
      --k;
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * (q - v[k]));
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = 1e30;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    d[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

std::vector<double> distance_transform(const Image& binary) {
  if (binary.format != PixelFormat::binary && binary.format != PixelFormat::gray8)
    throw ShapeError("distance_transform: single-channel input required");
  const int w = binary.width, h = binary.height;
  std::vector<double> col(size_t(w) * h);
  for (int x = 0; x < w; ++x) {
    // Vertical pixel distance to the nearest background cell or image border.
    double prev = 0.0;
    for (int y = 0; y < h; ++y) {
      prev = binary.at(x, y) ? prev + 1.0 : 0.0;
      col[size_t(y) * w + x] = prev;
    }
    prev = 0.0;
    for (int y = h - 1; y >= 0; --y) {
      prev = binary.at(x, y) ? prev + 1.0 : 0.0;
      double& c = col[size_t(y) * w + x];
      c = std::min(c, prev);
      c *= c;
    }
  }

  std::vector<double> out(size_t(w) * h);
  std::vector<double> f(size_t{1} * w), d(size_t{1} * w), z(size_t{1} * w + 1);
  std::vector<int> v(size_t{1} * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[size_t(x)] = col[size_t(y) * w + x];
    squared_dt_1d(f, d, v, z);
    for (int x = 0; x < w; ++x) {
      const double left = double(x + 1) * (x + 1);
      const double right = double(w - x) * (w - x);
      out[size_t(y) * w + x] = std::sqrt(std::min(d[size_t(x)], std::min(left, right)));
    }
  }
  return out;
}

// ---------------------------------------------------------------- histograms

double Histogram::sum() const { return std::accumulate(bins.begin(), bins.end(), 0.0); }

void Histogram::normalize() {
  const double s = sum();
  if (s <= 0.0) throw EmptyInputError("histogram: nothing to normalize");
  for (double& b : bins) b /= s;
}

std::array<Histogram, 3> hsv_histogram(const Image& hsv, const Image& mask,
                                       const HistogramBins& bins) {
  if (hsv.format != PixelFormat::hsv8) throw ShapeError("hsv_histogram: hsv8 input required");
  if (mask.width != hsv.width || mask.height != hsv.height)
    throw ShapeError("hsv_histogram: mask size mismatch");

  std::array<Histogram, 3> out;
  out[0] = {std::vector<double>(bins.h, 0.0), HsvChannel::H};
  out[1] = {std::vector<double>(bins.s, 0.0), HsvChannel::S};
  out[2] = {std::vector<double>(bins.v, 0.0), HsvChannel::V};

  size_t count = 0;
  const size_t n = hsv.pixel_count();
  for (size_t i = 0; i < n; ++i) {
    if (mask.data[i] == 0) continue;
    ++count;
    const int h = hsv.data[i * 3], s = hsv.data[i * 3 + 1], v = hsv.data[i * 3 + 2];
    out[0].bins[std::min(h * bins.h / 180, bins.h - 1)] += 1.0;
    out[1].bins[std::min(s * bins.s / 256, bins.s - 1)] += 1.0;
    out[2].bins[std::min(v * bins.v / 256, bins.v - 1)] += 1.0;
  }
  if (count == 0) throw EmptyInputError("hsv_histogram: empty mask");
  for (Histogram& hgram : out) hgram.normalize();
  return out;
}

double bhattacharyya_distance(const Histogram& a, const Histogram& b) {
  if (a.bins.size() != b.bins.size())
    throw ShapeError("bhattacharyya_distance: bin count mismatch");
  double bc = 0.0;
  for (size_t i = 0; i < a.bins.size(); ++i) bc += std::sqrt(a.bins[i] * b.bins[i]);
  return std::sqrt(std::max(0.0, 1.0 - std::min(bc, 1.0)));
}

// ---------------------------------------------------------------- circle fit

std::optional<CircleFit> fit_circle_arc(const std::vector<Vec2>& points, double r_min,
                                        double r_max) {
  if (points.size() < 6) throw InsufficientDataError("fit_circle_arc: need at least 6 points");

  // Kasa fit: minimize sum (x^2 + y^2 + D x + E y + F)^2 via normal equations.
  double sxx = 0, sxy = 0, syy = 0, sx = 0, sy = 0, sxz = 0, syz = 0, sz = 0;
  const double n = static_cast<double>(points.size());
  for (const Vec2& p : points) {
    const double z = p.x * p.x + p.y * p.y;
    sxx += p.x * p.x;
    sxy += p.x * p.y;
    syy += p.y * p.y;
    sx += p.x;
    sy += p.y;
    sxz += p.x * z;
    syz += p.y * z;
    sz += z;
  }
  double a[3][4] = {{sxx, sxy, sx, -sxz}, {sxy, syy, sy, -syz}, {sx, sy, n, -sz}};
  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 3; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-12) return std::nullopt;  // degenerate (collinear)
    std::swap(a[col], a[pivot]);
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (int c = col; c < 4; ++c) a[r][c] -= f * a[col][c];
    }
  }
  const double d = a[0][3] / a[0][0];
  const double e = a[1][3] / a[1][1];
  const double f = a[2][3] / a[2][2];
  const Vec2 center{-d * 0.5, -e * 0.5};
  const double r2 = center.squared_norm() - f;
  if (r2 <= 0.0) return std::nullopt;
  const double radius = std::sqrt(r2);
  if (radius < r_min || radius > r_max) return std::nullopt;

  // Coverage: 36 equal sectors around the center, counting sectors that hold
  // at least one inlier (radial residual within 20% of the radius).
  constexpr int kSectors = 36;
  bool occupied[kSectors] = {};
  const double tol = 0.2 * radius;
  for (const Vec2& p : points) {
    const Vec2 rel = p - center;
    if (std::abs(rel.norm() - radius) > tol) continue;
    int s = static_cast<int>(std::floor((std::atan2(rel.y, rel.x) + M_PI) / (2.0 * M_PI) * kSectors));
    s = std::clamp(s, 0, kSectors - 1);
    occupied[s] = true;
  }
  int filled = 0;
  for (bool o : occupied) filled += o ? 1 : 0;

  CircleFit fit;
  fit.center = center;
  fit.radius = radius;
  fit.arc_coverage = static_cast<double>(filled) / kSectors;
  return fit;
}

// ---------------------------------------------------------------- patches

Image extract_gray(const Image& src) {
  if (src.channels() == 1) {
    Image out = src;
    out.format = PixelFormat::gray8;
    return out;
  }
  Image out(src.width, src.height, PixelFormat::gray8);
  const size_t n = src.pixel_count();
  if (src.format == PixelFormat::hsv8) {
    for (size_t i = 0; i < n; ++i) out.data[i] = src.data[i * 3 + 2];
  } else {
    for (size_t i = 0; i < n; ++i) {
      const int r = src.data[i * 3], g = src.data[i * 3 + 1], b = src.data[i * 3 + 2];
      out.data[i] = static_cast<uint8_t>((r * 77 + g * 150 + b * 29) >> 8);
    }
  }
  return out;
}

Image crop(const Image& src, int x0, int y0, int w, int h) {
  Image out(w, h, src.format);
  const int ch = src.channels();
  for (int y = 0; y < h; ++y) {
    const int sy = std::clamp(y0 + y, 0, src.height - 1);
    for (int x = 0; x < w; ++x) {
      const int sx = std::clamp(x0 + x, 0, src.width - 1);
      for (int c = 0; c < ch; ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  return out;
}

namespace {

double sample_bilinear(const Image& gray, double x, double y) {
  x = std::clamp(x, 0.0, gray.width - 1.0);
  y = std::clamp(y, 0.0, gray.height - 1.0);
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, gray.width - 1), y1 = std::min(y0 + 1, gray.height - 1);
  const double fx = x - x0, fy = y - y0;
  const double v00 = gray.at(x0, y0), v10 = gray.at(x1, y0);
  const double v01 = gray.at(x0, y1), v11 = gray.at(x1, y1);
  return (v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy;
}

}  // namespace

Image resize_bilinear(const Image& gray, int out_w, int out_h) {
  if (gray.channels() != 1) throw ShapeError("resize_bilinear: single-channel input required");
  Image out(out_w, out_h, gray.format);
  const double sx = static_cast<double>(gray.width) / out_w;
  const double sy = static_cast<double>(gray.height) / out_h;
  for (int y = 0; y < out_h; ++y)
    for (int x = 0; x < out_w; ++x)
      out.at(x, y) = static_cast<uint8_t>(
          std::lround(sample_bilinear(gray, (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5)));
  return out;
}

Image mirror_horizontal(const Image& img) {
  Image out(img.width, img.height, img.format);
  const int ch = img.channels();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < ch; ++c) out.at(x, y, c) = img.at(img.width - 1 - x, y, c);
  return out;
}

Image rotate_bilinear(const Image& gray, double angle_rad) {
  if (gray.channels() != 1) throw ShapeError("rotate_bilinear: single-channel input required");
  Image out(gray.width, gray.height, gray.format);
  const double cx = (gray.width - 1) * 0.5, cy = (gray.height - 1) * 0.5;
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      // Inverse mapping: rotate the destination coordinate back.
      const double dx = x - cx, dy = y - cy;
      const double sx = cx + c * dx + s * dy;
      const double sy = cy - s * dx + c * dy;
      out.at(x, y) = static_cast<uint8_t>(std::lround(sample_bilinear(gray, sx, sy)));
    }
  }
  return out;
}

Image box_blur(const Image& img, int radius) {
  if (radius <= 0) return img;
  Image tmp(img.width, img.height, img.format);
  Image out(img.width, img.height, img.format);
  const int ch = img.channels();
  const int size = 2 * radius + 1;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < ch; ++c) {
        int acc = 0;
        for (int k = -radius; k <= radius; ++k)
          acc += img.at(std::clamp(x + k, 0, img.width - 1), y, c);
        tmp.at(x, y, c) = static_cast<uint8_t>(acc / size);
      }
    }
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < ch; ++c) {
        int acc = 0;
        for (int k = -radius; k <= radius; ++k)
          acc += tmp.at(x, std::clamp(y + k, 0, img.height - 1), c);
        out.at(x, y, c) = static_cast<uint8_t>(acc / size);
      }
    }
  }
  return out;
}

}  // namespace fv
