#include "fieldvision/detect.hpp"

#include <algorithm>
#include <cmath>

namespace fv {

namespace {

std::vector<std::vector<Vec2>> green_region_outlines(const Image& labels,
                                                     const DetectorConfig& cfg) {
  const Image green = label_mask(labels, Label::green);
  const auto comps = connected_components(green);
  const int min_area = int(cfg.boundary_min_area_frac * labels.width * labels.height);
  std::vector<std::vector<Vec2>> outlines;
  for (const auto& comp : comps) {
    if (comp.area() < min_area) break;  // sorted by area
    const auto contour = outer_contour(comp, labels.width, labels.height);
    if (contour.size() < 3) continue;
    std::vector<Vec2> poly;
    poly.reserve(contour.size() + 1);
    for (const auto& p : contour) poly.push_back({double(p.x), double(p.y)});
    poly.push_back(poly.front());  // close the loop so rdp may drop the seam
    outlines.push_back(rdp_simplify(poly, cfg.boundary_rdp_px));
  }
  if (outlines.empty()) throw NoFieldError("no green region large enough for a field boundary");
  return outlines;
}

}  // namespace

FieldBoundary detect_field_boundary(const Image& labels, const CameraModel& cam,
                                    const DetectorConfig& cfg) {
  const auto outlines = green_region_outlines(labels, cfg);
  const Intrinsics& intr = cam.intrinsics();
  const DistortionModel& dist = cam.distortion();

  std::vector<Vec2> undistorted;
  for (const auto& poly : outlines)
    // Long straight contour runs simplify down to their endpoints, which near
    // the image corners can sit outside the lens model; intermediate points
    // keep the hull supported there.
    for (const auto& p : densify_polyline(poly, cfg.hull_subdivide_px)) {
      try {
        undistorted.push_back(dist.undistort(intr.to_normalized(p)));
      } catch (const Error&) {
        // Vertices outside the lens model cannot support the hull.
      }
    }
  if (undistorted.size() < 3) throw NoFieldError("field outline lies outside the lens model");

  const auto hull = convex_hull(std::move(undistorted));
  if (hull.size() < 3) throw NoFieldError("degenerate field outline");

  // Subdivide hull edges so the re-distorted polygon follows the curved image
  // of each straight edge.
  FieldBoundary boundary;
  const double step_norm = cfg.hull_subdivide_px / intr.focal_x;
  for (size_t i = 0; i < hull.size(); ++i) {
    const Vec2& a = hull[i];
    const Vec2& b = hull[(i + 1) % hull.size()];
    const int n = std::max(1, int(std::ceil((b - a).norm() / step_norm)));
    for (int k = 0; k < n; ++k) {
      const double t = double(k) / n;
      boundary.polygon.push_back(intr.to_pixel(dist.distort(a + (b - a) * t)));
    }
  }
  return boundary;
}

FieldBoundary naive_field_boundary(const Image& labels, const DetectorConfig& cfg) {
  const auto outlines = green_region_outlines(labels, cfg);
  std::vector<Vec2> points;
  for (const auto& poly : outlines) points.insert(points.end(), poly.begin(), poly.end());
  FieldBoundary boundary;
  boundary.polygon = convex_hull(std::move(points));
  return boundary;
}

std::vector<Image> augment_positive(const Image& patch) {
  if (patch.width != patch.height) throw ShapeError("augment_positive: square patch required");
  const double angles[] = {0.0, 10.0, -10.0, 20.0, -20.0};
  std::vector<Image> out;
  out.reserve(10);
  for (double deg : angles) {
    Image rotated = deg == 0.0 ? patch : rotate_bilinear(patch, deg * M_PI / 180.0);
    out.push_back(rotated);
    out.push_back(mirror_horizontal(rotated));
  }
  return out;
}

VerifyResult verify_segment(const LineSegment2D& seg, const Image& labels, const Image& edges,
                            const CameraModel& cam, const DetectorConfig& cfg) {
  VerifyResult result;
  if (seg.length() < cfg.min_verify_length_px) return result;

  auto label_near = [&labels](const Vec2& p, Label which) {
    const int cx = int(std::lround(p.x)), cy = int(std::lround(p.y));
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = cx + dx, y = cy + dy;
        if (x < 0 || y < 0 || x >= labels.width || y >= labels.height) continue;
        if (labels.at(x, y) == uint8_t(which)) return true;
      }
    return false;
  };
  auto edge_between = [&](const Vec2& from, const Vec2& to) {
    // An edge pixel crossed on the way from the line center out to the flank.
    for (int k = 1; k <= 8; ++k) {
      const Vec2 p = from + (to - from) * (double(k) / 8.0);
      const int cx = int(std::lround(p.x)), cy = int(std::lround(p.y));
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = cx + dx, y = cy + dy;
          if (x < 0 || y < 0 || x >= edges.width || y >= edges.height) continue;
          if (edges.at(x, y) != 0) return true;
        }
    }
    return false;
  };

  for (int i = 0; i < 10; ++i) {
    const double t = double(i) / 9.0;
    const Vec2 p = seg.p0 + (seg.p1 - seg.p0) * t;
    Vec2 f1, f2;
    try {
      const Vec2 g = cam.pixel_to_ground(p);
      const Vec2 g2 = cam.pixel_to_ground(p + seg.direction() * std::min(4.0, seg.length() * 0.2));
      const Vec2 n = (g2 - g).normalized().perp();
      f1 = cam.ground_to_pixel(g + n * cfg.verify_halfwidth_m);
      f2 = cam.ground_to_pixel(g - n * cfg.verify_halfwidth_m);
    } catch (const Error&) {
      continue;  // this sample point fails every check
    }
    if (label_near(p, Label::white)) ++result.white;
    if (label_near(f1, Label::green) && label_near(f2, Label::green)) ++result.green;
    if (edge_between(p, f1) && edge_between(p, f2)) ++result.edge;
  }
  result.pass = result.white >= cfg.verify.white && result.green >= cfg.verify.green &&
                result.edge >= cfg.verify.edge;
  return result;
}

namespace {

struct SegmentFrameInfo {
  double angle;   // [0, pi)
  double length;
  Vec2 mid;
};

bool try_merge(const LineSegment2D& a, const LineSegment2D& b, double angle_tol,
               double lateral_tol, double gap_tol, LineSegment2D& merged) {
  const double la = a.length(), lb = b.length();
  if (la <= 0.0 || lb <= 0.0) return false;
  double da = a.angle() - b.angle();
  if (da < 0) da = -da;
  if (da > M_PI / 2) da = M_PI - da;
  if (da > angle_tol) return false;

  // Length-weighted mean direction via angle doubling.
  const double wa = la, wb = lb;
  const double sx = wa * std::cos(2 * a.angle()) + wb * std::cos(2 * b.angle());
  const double sy = wa * std::sin(2 * a.angle()) + wb * std::sin(2 * b.angle());
  const double mean_angle = 0.5 * std::atan2(sy, sx);
  const Vec2 u{std::cos(mean_angle), std::sin(mean_angle)};
  const Vec2 n = u.perp();
  const Vec2 m = (a.midpoint() * wa + b.midpoint() * wb) / (wa + wb);

  double lo_a = 1e30, hi_a = -1e30, lo_b = 1e30, hi_b = -1e30;
  for (const Vec2& p : {a.p0, a.p1}) {
    if (std::abs((p - m).dot(n)) > lateral_tol) return false;
    const double t = (p - m).dot(u);
    lo_a = std::min(lo_a, t);
    hi_a = std::max(hi_a, t);
  }
  for (const Vec2& p : {b.p0, b.p1}) {
    if (std::abs((p - m).dot(n)) > lateral_tol) return false;
    const double t = (p - m).dot(u);
    lo_b = std::min(lo_b, t);
    hi_b = std::max(hi_b, t);
  }
  const double gap = std::max(lo_b - hi_a, lo_a - hi_b);
  if (gap > gap_tol) return false;

  const double lo = std::min(lo_a, lo_b), hi = std::max(hi_a, hi_b);
  merged = {m + u * lo, m + u * hi, a.frame};
  return true;
}

}  // namespace

std::vector<LineSegment2D> merge_segments(std::vector<LineSegment2D> segs, double angle_tol,
                                          double lateral_tol, double gap_tol) {
  if (angle_tol <= 0 || lateral_tol <= 0 || gap_tol <= 0)
    throw ConfigError("merge_segments: tolerances must be positive");
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < segs.size() && !changed; ++i) {
      for (size_t j = i + 1; j < segs.size() && !changed; ++j) {
        LineSegment2D merged;
        if (try_merge(segs[i], segs[j], angle_tol, lateral_tol, gap_tol, merged)) {
          segs[i] = merged;
          segs.erase(segs.begin() + long(j));
          changed = true;
        }
      }
    }
  }
  return segs;
}

// Rasterizes the polygon interior, then expands it by margin pixels so edges
// sitting exactly on the boundary survive the masking.
Image rasterize_polygon(const std::vector<Vec2>& polygon, int width, int height, int margin) {
  Image mask(width, height, PixelFormat::binary);
  std::fill(mask.data.begin(), mask.data.end(), 0);
  if (polygon.size() < 3) return mask;
  for (int y = 0; y < height; ++y) {
    // Scanline crossings at row center.
    std::vector<double> xs;
    const double fy = double(y);
    for (size_t i = 0; i < polygon.size(); ++i) {
      const Vec2& a = polygon[i];
      const Vec2& b = polygon[(i + 1) % polygon.size()];
      if ((a.y <= fy) == (b.y <= fy)) continue;
      xs.push_back(a.x + (b.x - a.x) * (fy - a.y) / (b.y - a.y));
    }
    std::sort(xs.begin(), xs.end());
    for (size_t k = 0; k + 1 < xs.size(); k += 2) {
      const int x0 = std::max(0, int(std::ceil(xs[k])));
      const int x1 = std::min(width - 1, int(std::floor(xs[k + 1])));
      for (int x = x0; x <= x1; ++x) mask.at(x, y) = 255;
    }
  }
  if (margin > 0) {
    // Separable dilation with a running window.
    Image tmp = mask;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        if (tmp.at(x, y)) continue;
        for (int d = -margin; d <= margin; ++d) {
          const int nx = x + d;
          if (nx >= 0 && nx < width && tmp.at(nx, y)) {
            mask.at(x, y) = 255;
            break;
          }
        }
      }
    tmp = mask;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        if (tmp.at(x, y)) continue;
        for (int d = -margin; d <= margin; ++d) {
          const int ny = y + d;
          if (ny >= 0 && ny < height && tmp.at(x, ny)) {
            mask.at(x, y) = 255;
            break;
          }
        }
      }
  }
  return mask;
}

LineDetectionResult detect_lines(const Image& hsv, const Image& labels,
                                 const FieldBoundary& boundary, const CameraModel& cam,
                                 const DetectorConfig& cfg, uint64_t seed) {
  const Image gray = extract_gray(hsv);
  Image edges = canny(gray, cfg.canny);

  const Image inside = rasterize_polygon(boundary.polygon, edges.width, edges.height, 6);
  for (size_t i = 0; i < edges.data.size(); ++i)
    if (!inside.data[i]) edges.data[i] = 0;

  auto raw = hough_segments(edges, cfg.hough, seed);
  auto merged =
      merge_segments(std::move(raw), cfg.merge.angle_tol, cfg.merge.lateral_tol, cfg.merge.gap_tol);

  LineDetectionResult result;
  for (const auto& seg : merged) {
    const VerifyResult v = verify_segment(seg, labels, edges, cam, cfg);
    if (v.pass) {
      result.segments.push_back(seg);
      result.reports.push_back(v);
    }
  }
  return result;
}

std::optional<CircleDetection> detect_centre_circle(const std::vector<LineSegment2D>& ego_segments,
                                                    const FieldSpec& spec,
                                                    const DetectorConfig& cfg) {
  std::vector<Vec2> points;
  for (const auto& seg : ego_segments) {
    if (seg.length() >= cfg.short_segment_max_m) continue;
    for (double t : {0.25, 0.5, 0.75}) points.push_back(seg.p0 + (seg.p1 - seg.p0) * t);
  }
  if (points.size() < 6) return std::nullopt;
  const double r = spec.circle_radius;
  std::optional<CircleFit> fit =
      fit_circle_arc(points, r * (1.0 - cfg.circle_radius_tol), r * (1.0 + cfg.circle_radius_tol));
  if (!fit || fit->arc_coverage < cfg.min_arc_coverage) return std::nullopt;
  return CircleDetection{fit->center, fit->radius};
}

std::vector<Vec2> detect_goal_posts(const Image& labels, const FieldBoundary& boundary,
                                    const CameraModel& cam, const DetectorConfig& cfg) {
  std::vector<Vec2> posts;
  if (boundary.polygon.size() < 3) return posts;
  const Image white = label_mask(labels, Label::white);
  const Image inside = rasterize_polygon(boundary.polygon, labels.width, labels.height, 0);
  const auto comps = connected_components(white);

  for (const auto& comp : comps) {
    if (comp.area() < cfg.post_min_pixels) break;
    // Pixels protruding above the field boundary drive the detection; their
    // columns locate the post shaft even when it is fused with field lines.
    std::vector<PixelCoord> above;
    for (const auto& p : comp.pixels)
      if (!inside.at(p.x, p.y)) above.push_back(p);
    if (int(above.size()) < cfg.post_min_pixels / 2) continue;

    // Split the protruding pixels into column clusters (one per post).
    std::vector<int> cols;
    cols.reserve(above.size());
    for (const auto& p : above) cols.push_back(p.x);
    std::sort(cols.begin(), cols.end());
    cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    std::vector<std::pair<int, int>> clusters;
    int start = cols.front(), prev = cols.front();
    for (size_t i = 1; i <= cols.size(); ++i) {
      if (i == cols.size() || cols[i] > prev + 10) {
        clusters.push_back({start, prev});
        if (i < cols.size()) start = cols[i];
      }
      if (i < cols.size()) prev = cols[i];
    }

    for (const auto& [c0, c1] : clusters) {
      const int band0 = c0 - 1, band1 = c1 + 1;
      double sum_x = 0, sum_y = 0;
      double sxx = 0, sxy = 0, syy = 0;
      int n = 0, min_y = labels.height, max_y = -1;
      for (const auto& p : comp.pixels) {
        if (p.x < band0 || p.x > band1) continue;
        sum_x += p.x;
        sum_y += p.y;
        ++n;
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
      }
      if (n < cfg.post_min_pixels) continue;
      const double mx = sum_x / n, my = sum_y / n;
      for (const auto& p : comp.pixels) {
        if (p.x < band0 || p.x > band1) continue;
        sxx += (p.x - mx) * (p.x - mx);
        sxy += (p.x - mx) * (p.y - my);
        syy += (p.y - my) * (p.y - my);
      }
      sxx /= n;
      sxy /= n;
      syy /= n;
      const double tr = sxx + syy, det = sxx * syy - sxy * sxy;
      const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
      const double l1 = tr / 2 + disc, l2 = std::max(1e-6, tr / 2 - disc);
      if (std::sqrt(l1 / l2) < cfg.post_min_aspect) continue;
      const double axis = 0.5 * std::atan2(2 * sxy, sxx - syy);
      const double tilt = std::abs(std::abs(axis) - M_PI / 2);
      if (tilt > cfg.post_max_tilt) continue;

      // Ground contact: bottom rows of the shaft inside the column band.
      double bx = 0;
      int bn = 0;
      for (const auto& p : comp.pixels) {
        if (p.x < band0 || p.x > band1 || p.y < max_y - 1) continue;
        bx += p.x;
        ++bn;
      }
      if (bn == 0) continue;
      try {
        posts.push_back(cam.pixel_to_ground({bx / bn, double(max_y)}));
      } catch (const Error&) {
      }
    }
  }
  return posts;
}

Detections detect_frame(const Image& rgb, const CameraModel& cam, const FieldSpec& spec,
                        const BallClassifier* classifier,
                        const std::array<Histogram, 3>* ball_reference, const DetectorConfig& cfg,
                        uint64_t seed) {
  Detections det;
  const Image hsv = rgb_to_hsv(rgb);
  const Image labels = classify_colors(hsv, cfg.colors);

  try {
    det.boundary = detect_field_boundary(labels, cam, cfg);
  } catch (const NoFieldError&) {
    return det;
  }

  const LineDetectionResult lines = detect_lines(hsv, labels, det.boundary, cam, cfg, seed);
  for (const auto& seg : lines.segments) {
    try {
      const Vec2 a = cam.pixel_to_ground(seg.p0);
      const Vec2 b = cam.pixel_to_ground(seg.p1);
      det.lines.push_back({a, b, Frame::egocentric});
    } catch (const Error&) {
    }
  }

  det.circle = detect_centre_circle(det.lines, spec, cfg);
  if (det.circle) {
    // Chords the segment detector cuts from the ring are explained by the
    // circle landmark; keeping them would double-count it downstream.
    const Vec2 c = det.circle->center;
    const double R = det.circle->radius;
    std::erase_if(det.lines, [&](const LineSegment2D& s) {
      if (s.length() > 2.0 * cfg.short_segment_max_m) return false;
      for (double t : {0.0, 0.5, 1.0}) {
        const Vec2 p = s.p0 + (s.p1 - s.p0) * t;
        if (std::abs((p - c).norm() - R) > 0.12) return false;
      }
      return true;
    });
  }
  det.goal_posts = detect_goal_posts(labels, det.boundary, cam, cfg);

  if (classifier && ball_reference) {
    const auto candidates =
        detect_ball_candidates(hsv, labels, det.boundary, *ball_reference, cam, cfg);
    double best_score = -1e30;
    for (const auto& cand : candidates) {
      const ClassifyResult r = classify_ball(cand.patch, *classifier);
      if (!r.accepted || r.score <= best_score) continue;
      best_score = r.score;
      try {
        det.ball = cam.pixel_to_ground({cand.center.x, cand.center.y + cand.radius});
      } catch (const Error&) {
        det.ball.reset();
      }
    }
  }
  return det;
}

}  // namespace fv
