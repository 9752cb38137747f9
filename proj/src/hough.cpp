#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "fieldvision/imgproc.hpp"

namespace fv {

// Progressive probabilistic Hough transform in the style of Matas et al.:
// edge pixels vote one at a time in random order; once a bin reaches the
// vote threshold the supporting pixels are walked along the winning
// direction, gaps up to max_gap are bridged, and consumed pixels retract
// their votes so each edge pixel supports at most one segment.
std::vector<LineSegment2D> hough_segments(const Image& edges, const HoughParams& params,
                                          uint64_t seed) {
  if (edges.channels() != 1) throw ShapeError("hough_segments: binary input required");
  if (params.min_length <= 0.0 || params.max_gap <= 0.0 || params.vote_threshold <= 0 ||
      params.rho_resolution <= 0.0 || params.theta_resolution_deg <= 0.0)
    throw ConfigError("hough_segments: thresholds must be positive");

  const int w = edges.width, h = edges.height;
  const int numangle = std::max(1, static_cast<int>(std::lround(180.0 / params.theta_resolution_deg)));
  const int numrho = static_cast<int>(std::lround((w + h) * 2.0 / params.rho_resolution)) + 1;
  const double irho = 1.0 / params.rho_resolution;
  const int rho_offset = (numrho - 1) / 2;

  std::vector<double> tab_sin(numangle), tab_cos(numangle);
  for (int n = 0; n < numangle; ++n) {
    const double ang = n * params.theta_resolution_deg * M_PI / 180.0;
    tab_sin[n] = std::sin(ang) * irho;
    tab_cos[n] = std::cos(ang) * irho;
  }

  std::vector<uint8_t> mask(static_cast<size_t>(w) * h, 0);
  std::vector<PixelCoord> points;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (edges.at(x, y) != 0) {
        mask[static_cast<size_t>(y) * w + x] = 1;
        points.push_back({x, y});
      }

  std::mt19937_64 rng(seed);
  std::shuffle(points.begin(), points.end(), rng);

  std::vector<int> accum(static_cast<size_t>(numangle) * numrho, 0);
  std::vector<LineSegment2D> out;

  for (const PixelCoord& seed_pt : points) {
    const size_t seed_idx = static_cast<size_t>(seed_pt.y) * w + seed_pt.x;
    if (!mask[seed_idx]) continue;  // already consumed by an earlier segment

    // Vote across all angles and remember the best bin.
    int best_votes = params.vote_threshold - 1, best_angle = -1;
    for (int n = 0; n < numangle; ++n) {
      const int r = static_cast<int>(std::lround(seed_pt.x * tab_cos[n] + seed_pt.y * tab_sin[n])) +
                    rho_offset;
      const int v = ++accum[static_cast<size_t>(n) * numrho + r];
      if (v > best_votes) {
        best_votes = v;
        best_angle = n;
      }
    }
    if (best_angle < 0) continue;

    const double a = tab_cos[best_angle] * params.rho_resolution;  // cos(theta)
    const double b = tab_sin[best_angle] * params.rho_resolution;  // sin(theta)
    // Direction along the line is (-sin, cos); walk the major axis in unit steps.
    double dx, dy;
    if (std::abs(b) > std::abs(a)) {
      dx = b > 0 ? 1.0 : -1.0;
      dy = -a * dx / b;
    } else {
      dy = a > 0 ? 1.0 : -1.0;
      dx = -b * dy / a;
    }

    // The walk tolerates 1 px of lateral drift across the minor axis so the
    // quantized angle can track a rasterized line over long distances.
    const bool x_major = std::abs(b) > std::abs(a);
    const int mx = x_major ? 0 : 1;
    const int my = x_major ? 1 : 0;
    auto corridor_hit = [&](int xi, int yi, PixelCoord& hit) {
      for (int o : {0, -1, 1}) {
        const int cx = xi + o * mx, cy = yi + o * my;
        if (cx < 0 || cy < 0 || cx >= w || cy >= h) continue;
        if (mask[static_cast<size_t>(cy) * w + cx]) {
          hit = {cx, cy};
          return true;
        }
      }
      return false;
    };

    PixelCoord line_end[2] = {seed_pt, seed_pt};
    int last_hit_step[2] = {0, 0};
    for (int k = 0; k < 2; ++k) {
      const double sx = k == 0 ? dx : -dx;
      const double sy = k == 0 ? dy : -dy;
      double x = seed_pt.x, y = seed_pt.y;
      int gap = 0;
      for (int step = 1;; ++step) {
        x += sx;
        y += sy;
        const int xi = static_cast<int>(std::lround(x)), yi = static_cast<int>(std::lround(y));
        if (xi < 0 || yi < 0 || xi >= w || yi >= h) break;
        PixelCoord hit;
        if (corridor_hit(xi, yi, hit)) {
          gap = 0;
          line_end[k] = hit;
          last_hit_step[k] = step;
        } else if (++gap > static_cast<int>(params.max_gap)) {
          break;
        }
      }
    }

    const double len = std::hypot(static_cast<double>(line_end[1].x - line_end[0].x),
                                  static_cast<double>(line_end[1].y - line_end[0].y));
    const bool good = len >= params.min_length;

    // Second walk: consume corridor pixels; a good line also retracts their votes.
    int support = 0;
    auto consume = [&](int xi, int yi) {
      if (xi < 0 || yi < 0 || xi >= w || yi >= h) return;
      const size_t idx = static_cast<size_t>(yi) * w + xi;
      if (!mask[idx]) return;
      mask[idx] = 0;
      ++support;
      if (good) {
        for (int n = 0; n < numangle; ++n) {
          const int r = static_cast<int>(std::lround(xi * tab_cos[n] + yi * tab_sin[n])) +
                        rho_offset;
          int& cell = accum[static_cast<size_t>(n) * numrho + r];
          if (cell > 0) --cell;
        }
      }
    };
    for (int k = 0; k < 2; ++k) {
      const double sx = k == 0 ? dx : -dx;
      const double sy = k == 0 ? dy : -dy;
      double x = seed_pt.x, y = seed_pt.y;
      for (int step = 0; step <= last_hit_step[k]; ++step) {
        const int xi = static_cast<int>(std::lround(x)), yi = static_cast<int>(std::lround(y));
        for (int o : {0, -1, 1}) consume(xi + o * mx, yi + o * my);
        x += sx;
        y += sy;
      }
    }
    if (good && support >= params.vote_threshold) {
      out.push_back({{static_cast<double>(line_end[0].x), static_cast<double>(line_end[0].y)},
                     {static_cast<double>(line_end[1].x), static_cast<double>(line_end[1].y)},
                     Frame::pixel});
    }
  }
  return out;
}

}  // namespace fv
