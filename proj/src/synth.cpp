#include "fieldvision/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace fv {

namespace {

uint64_t splitmix(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Uniform [0, 1) from integer coordinates, stable across runs.
double unoise(uint64_t seed, int64_t a, int64_t b, uint64_t salt) {
  const uint64_t h = splitmix(seed ^ splitmix(uint64_t(a) * 0x8DA6B343ULL ^
                                              uint64_t(b) * 0xD8163841ULL ^ salt * 0xCB1AB31FULL));
  return double(h >> 11) * (1.0 / 9007199254740992.0);
}

double snoise(uint64_t seed, int64_t a, int64_t b, uint64_t salt) {
  return 2.0 * unoise(seed, a, b, salt) - 1.0;
}

// Low-frequency mottling: value noise on a 24 px lattice.
double mottle(uint64_t seed, int x, int y, uint64_t salt) {
  const int g = 24;
  const int gx = x / g, gy = y / g;
  const double fx = double(x - gx * g) / g, fy = double(y - gy * g) / g;
  const double n00 = unoise(seed, gx, gy, salt), n10 = unoise(seed, gx + 1, gy, salt);
  const double n01 = unoise(seed, gx, gy + 1, salt), n11 = unoise(seed, gx + 1, gy + 1, salt);
  const double top = n00 + (n10 - n00) * fx;
  const double bot = n01 + (n11 - n01) * fx;
  return (top + (bot - top) * fy) - 0.5;
}

struct RayLut {
  double fx = 0, fy = 0, cx = 0, cy = 0, k1 = 0, k2 = 0, k3 = 0;
  int width = 0, height = 0;
  std::vector<double> nx, ny;
  std::vector<uint8_t> ok;

  bool matches(const Intrinsics& intr, const DistortionModel& dist) const {
    return fx == intr.focal_x && fy == intr.focal_y && cx == intr.principal_point.x &&
           cy == intr.principal_point.y && width == intr.image_width &&
           height == intr.image_height && k1 == dist.k1() && k2 == dist.k2() && k3 == dist.k3();
  }
};

const RayLut& ray_lut(const Intrinsics& intr, const DistortionModel& dist) {
  static RayLut lut;
  if (lut.matches(intr, dist)) return lut;
  lut = RayLut{intr.focal_x,           intr.focal_y, intr.principal_point.x,
               intr.principal_point.y, dist.k1(),    dist.k2(),
               dist.k3(),              intr.image_width, intr.image_height,
               {},                     {},           {}};
  const size_t n = size_t(intr.image_width) * size_t(intr.image_height);
  lut.nx.assign(n, 0.0);
  lut.ny.assign(n, 0.0);
  lut.ok.assign(n, 0);
  for (int y = 0; y < intr.image_height; ++y)
    for (int x = 0; x < intr.image_width; ++x) {
      const size_t i = size_t(y) * size_t(intr.image_width) + size_t(x);
      try {
        const Vec2 u = dist.undistort(intr.to_normalized({double(x), double(y)}));
        lut.nx[i] = u.x;
        lut.ny[i] = u.y;
        lut.ok[i] = 1;
      } catch (const Error&) {
      }
    }
  return lut;
}

struct SegmentGeom {
  Vec2 p0;
  Vec2 dir;      // unit
  double length = 0;
  double min_x = 0, max_x = 0, min_y = 0, max_y = 0;
};

// Distance from p to the segment and the clamped projection parameter in [0, 1].
double segment_distance(const SegmentGeom& s, const Vec2& p, double& t01) {
  const Vec2 d = p - s.p0;
  double t = d.dot(s.dir);
  t = std::clamp(t, 0.0, s.length);
  t01 = s.length > 0 ? t / s.length : 0.0;
  return (d - s.dir * t).norm();
}

uint8_t clamp8(double v) { return uint8_t(std::clamp(std::lround(v), 0L, 255L)); }

void box_blur_rgb(Image& img, int radius) {
  if (radius <= 0) return;
  const int w = img.width, h = img.height;
  Image tmp = img;
  for (int c = 0; c < 3; ++c) {
    // Horizontal then vertical pass with running sums.
    for (int y = 0; y < h; ++y) {
      int sum = 0, count = 0;
      for (int x = -radius; x <= radius; ++x)
        if (x >= 0 && x < w) {
          sum += img.at(x, y, c);
          ++count;
        }
      for (int x = 0; x < w; ++x) {
        tmp.at(x, y, c) = uint8_t((sum + count / 2) / count);
        const int add = x + radius + 1, sub = x - radius;
        if (add < w) {
          sum += img.at(add, y, c);
          ++count;
        }
        if (sub >= 0) {
          sum -= img.at(sub, y, c);
          --count;
        }
      }
    }
    for (int x = 0; x < w; ++x) {
      int sum = 0, count = 0;
      for (int y = -radius; y <= radius; ++y)
        if (y >= 0 && y < h) {
          sum += tmp.at(x, y, c);
          ++count;
        }
      for (int y = 0; y < h; ++y) {
        img.at(x, y, c) = uint8_t((sum + count / 2) / count);
        const int add = y + radius + 1, sub = y - radius;
        if (add < h) {
          sum += tmp.at(x, add, c);
          ++count;
        }
        if (sub >= 0) {
          sum -= tmp.at(x, sub, c);
          --count;
        }
      }
    }
  }
}

struct Hit {
  double t = 1e30;
  MaskClass cls = MaskClass::background;
  Vec3 point;
  Vec3 normal;
  int object = -1;  // post or occluder index
};

}  // namespace

std::pair<Image, GroundTruth> render(const SceneConfig& cfg, const CameraModel& cam,
                                     const FieldSpec& spec) {
  spec.validate();
  const Intrinsics& intr = cam.intrinsics();
  const Transform3 pose = camera_pose(cfg.chain);
  if (pose.translation.z <= 0.0) throw ConfigError("render: camera is not above the ground");

  const RayLut& lut = ray_lut(intr, cam.distortion());
  const CameraModel view = cam.with_chain(cfg.chain);

  const FieldLines field = field_line_segments(spec);
  std::vector<SegmentGeom> segs;
  segs.reserve(field.segments.size());
  const double lw2 = spec.line_width * 0.5;
  for (const auto& s : field.segments) {
    SegmentGeom g;
    g.p0 = s.p0;
    g.dir = s.direction();
    g.length = s.length();
    g.min_x = std::min(s.p0.x, s.p1.x) - lw2;
    g.max_x = std::max(s.p0.x, s.p1.x) + lw2;
    g.min_y = std::min(s.p0.y, s.p1.y) - lw2;
    g.max_y = std::max(s.p0.y, s.p1.y) + lw2;
    segs.push_back(g);
  }

  const double ct = std::cos(cfg.robot_pose.theta), st = std::sin(cfg.robot_pose.theta);
  const Vec3 origin = pose.translation;

  std::optional<Vec3> ball_center;
  if (cfg.ball_position) {
    const Vec2 e = field_to_ego(cfg.robot_pose, *cfg.ball_position);
    ball_center = Vec3{e.x, e.y, cfg.ball_radius};
  }
  std::vector<Vec2> posts_ego;
  if (cfg.draw_posts)
    for (const auto& p : spec.goal_post_positions)
      posts_ego.push_back(field_to_ego(cfg.robot_pose, p));

  const Vec3 light = Vec3{0.3, -0.2, 1.0}.normalized();
  const uint64_t seed = cfg.seed;

  Image img(intr.image_width, intr.image_height, PixelFormat::rgb8);
  GroundTruth truth;
  truth.pose = cfg.robot_pose;
  truth.mask = Image(intr.image_width, intr.image_height, PixelFormat::gray8);

  struct SegAccum {
    int count = 0;
    double tmin = 2.0, tmax = -1.0;
  };
  std::vector<SegAccum> seg_accum(segs.size());
  std::vector<int> post_count(posts_ego.size(), 0);

  for (int py = 0; py < intr.image_height; ++py) {
    for (int px = 0; px < intr.image_width; ++px) {
      const size_t idx = size_t(py) * size_t(intr.image_width) + size_t(px);
      double r = 0, g = 0, b = 0;
      MaskClass cls = MaskClass::background;

      if (!lut.ok[idx]) {
        // Outside the lens model: dark vignetted corner.
        const double n = snoise(seed, px, py, 4);
        r = g = 24 + 4 * n;
        b = 26 + 4 * n;
        img.at(px, py, 0) = clamp8(cfg.lighting_gain * r + cfg.lighting_offset);
        img.at(px, py, 1) = clamp8(cfg.lighting_gain * g + cfg.lighting_offset);
        img.at(px, py, 2) = clamp8(cfg.lighting_gain * b + cfg.lighting_offset);
        truth.mask.at(px, py) = uint8_t(MaskClass::background);
        continue;
      }

      const Vec3 d = (pose.rotation * Vec3{lut.nx[idx], lut.ny[idx], 1.0}).normalized();
      Hit hit;

      if (ball_center) {
        const Vec3 oc = origin - *ball_center;
        const double bq = oc.dot(d);
        const double disc = bq * bq - (oc.dot(oc) - cfg.ball_radius * cfg.ball_radius);
        if (disc >= 0) {
          const double t = -bq - std::sqrt(disc);
          if (t > 0 && t < hit.t) {
            hit.t = t;
            hit.cls = MaskClass::ball;
            hit.point = origin + d * t;
            hit.normal = (hit.point - *ball_center) * (1.0 / cfg.ball_radius);
          }
        }
      }

      for (size_t pi = 0; pi < posts_ego.size(); ++pi) {
        const double ox = origin.x - posts_ego[pi].x, oy = origin.y - posts_ego[pi].y;
        const double a2 = d.x * d.x + d.y * d.y;
        if (a2 < 1e-12) continue;
        const double bq = ox * d.x + oy * d.y;
        const double cq = ox * ox + oy * oy - cfg.post_radius * cfg.post_radius;
        const double disc = bq * bq - a2 * cq;
        if (disc < 0) continue;
        const double t = (-bq - std::sqrt(disc)) / a2;
        if (t <= 0 || t >= hit.t) continue;
        const double z = origin.z + t * d.z;
        if (z < 0 || z > cfg.post_height) continue;
        hit.t = t;
        hit.cls = MaskClass::post;
        hit.point = origin + d * t;
        hit.normal = Vec3{(hit.point.x - posts_ego[pi].x) / cfg.post_radius,
                          (hit.point.y - posts_ego[pi].y) / cfg.post_radius, 0.0};
        hit.object = int(pi);
      }

      for (size_t oi = 0; oi < cfg.occluders.size(); ++oi) {
        const OccluderBox& box = cfg.occluders[oi];
        // Ray in field frame.
        const Vec3 of{ct * origin.x - st * origin.y + cfg.robot_pose.x,
                      st * origin.x + ct * origin.y + cfg.robot_pose.y, origin.z};
        const Vec3 df{ct * d.x - st * d.y, st * d.x + ct * d.y, d.z};
        const double lo[3] = {box.position.x - box.size_x * 0.5, box.position.y - box.size_y * 0.5,
                              0.0};
        const double hi[3] = {box.position.x + box.size_x * 0.5, box.position.y + box.size_y * 0.5,
                              box.height};
        const double o3[3] = {of.x, of.y, of.z}, d3[3] = {df.x, df.y, df.z};
        double tmin = 1e-9, tmax = hit.t;
        int axis = -1;
        for (int k = 0; k < 3; ++k) {
          if (std::abs(d3[k]) < 1e-12) {
            if (o3[k] < lo[k] || o3[k] > hi[k]) {
              tmin = 1e30;
              break;
            }
            continue;
          }
          double t0 = (lo[k] - o3[k]) / d3[k], t1 = (hi[k] - o3[k]) / d3[k];
          if (t0 > t1) std::swap(t0, t1);
          if (t0 > tmin) {
            tmin = t0;
            axis = k;
          }
          tmax = std::min(tmax, t1);
          if (tmin > tmax) break;
        }
        if (tmin <= tmax && tmin < hit.t && tmin > 1e-9) {
          hit.t = tmin;
          hit.cls = MaskClass::occluder;
          hit.point = origin + d * tmin;
          Vec3 nf{0, 0, 0};
          if (axis == 0) nf.x = d3[0] > 0 ? -1.0 : 1.0;
          if (axis == 1) nf.y = d3[1] > 0 ? -1.0 : 1.0;
          if (axis == 2) nf.z = d3[2] > 0 ? -1.0 : 1.0;
          hit.normal = Vec3{ct * nf.x + st * nf.y, -st * nf.x + ct * nf.y, nf.z};
          hit.object = int(oi);
        }
      }

      int ground_seg = -1;
      double ground_seg_t = 0.0;
      bool ground_circle = false;
      if (d.z < -1e-9) {
        const double t = -origin.z / d.z;
        if (t > 0 && t < hit.t) {
          const Vec3 p = origin + d * t;
          const Vec2 pf = ego_to_field(cfg.robot_pose, {p.x, p.y});
          if (std::abs(pf.x) <= spec.half_length() + cfg.border_margin &&
              std::abs(pf.y) <= spec.half_width() + cfg.border_margin) {
            hit.t = t;
            hit.point = p;
            hit.normal = {0, 0, 1};
            hit.cls = MaskClass::grass;
            double best = 1e30;
            for (size_t si = 0; si < segs.size(); ++si) {
              const SegmentGeom& sg = segs[si];
              if (pf.x < sg.min_x || pf.x > sg.max_x || pf.y < sg.min_y || pf.y > sg.max_y)
                continue;
              double t01 = 0;
              const double dist = segment_distance(sg, pf, t01);
              if (dist <= lw2 && dist < best) {
                best = dist;
                ground_seg = int(si);
                ground_seg_t = t01;
              }
            }
            const double ring = std::abs((pf - field.circle_center).norm() - field.circle_radius);
            if (ring <= lw2 && ring < best) {
              ground_seg = -1;
              ground_circle = true;
            }
            if (ground_seg >= 0 || ground_circle) hit.cls = MaskClass::line;
          } else {
            // Floor beyond the carpet.
            hit.t = t;
            hit.point = p;
            hit.normal = {0, 0, 1};
            hit.cls = MaskClass::background;
          }
        }
      }

      switch (hit.cls) {
        case MaskClass::grass: {
          const double dv = cfg.grass_noise * (0.7 * snoise(seed, px, py, 1) +
                                               1.2 * mottle(seed, px, py, 2));
          r = 40 + dv * 0.4;
          g = 130 + dv;
          b = 45 + dv * 0.4;
          break;
        }
        case MaskClass::line: {
          const double wear = 30.0 * cfg.line_wear * (mottle(seed, px, py, 3) + 0.5);
          const double n = 6.0 * snoise(seed, px, py, 1);
          const double v = 208 - wear + n;
          r = v;
          g = v;
          b = v - 6;
          break;
        }
        case MaskClass::ball: {
          const Vec3 nf{ct * hit.normal.x - st * hit.normal.y,
                        st * hit.normal.x + ct * hit.normal.y, hit.normal.z};
          const double u = std::atan2(nf.y, nf.x);
          const double v = std::acos(std::clamp(nf.z, -1.0, 1.0));
          const int iu = int(std::floor((u + M_PI) / (2 * M_PI) * 10.0));
          const int iv = int(std::floor(v / M_PI * 5.0));
          const bool dark = unoise(1337, iu, iv, 9) < 0.16;
          const double albedo = dark ? 118 : 238;
          const double lambert = std::max(0.0, hit.normal.dot(light));
          const double i = albedo * (0.72 + 0.28 * lambert) + 3.0 * snoise(seed, px, py, 5);
          r = i;
          g = i;
          b = i * 0.98;
          break;
        }
        case MaskClass::post: {
          const double lambert = std::max(0.0, hit.normal.dot(light));
          const double i = 232 * (0.74 + 0.26 * lambert) + 3.0 * snoise(seed, px, py, 6);
          r = i;
          g = i;
          b = i;
          break;
        }
        case MaskClass::occluder: {
          const OccluderBox& box = cfg.occluders[size_t(hit.object)];
          const double lambert = std::max(0.0, hit.normal.dot(light));
          const double shade = 0.55 + 0.45 * lambert;
          const double n = 4.0 * snoise(seed, px, py, 7);
          r = box.color[0] * shade + n;
          g = box.color[1] * shade + n;
          b = box.color[2] * shade + n;
          break;
        }
        case MaskClass::background: {
          if (hit.t < 1e29) {
            // Visible floor outside the carpet.
            const double n = 5.0 * snoise(seed, px, py, 4);
            r = 126 + n;
            g = 124 + n;
            b = 121 + n;
          } else {
            const double n = 4.0 * snoise(seed, px, py, 4);
            const double grad = 12.0 * double(py) / double(intr.image_height);
            r = 138 + n - grad;
            g = 136 + n - grad;
            b = 134 + n - grad;
          }
          break;
        }
      }

      // Ball contact shadow on the ground.
      if ((hit.cls == MaskClass::grass || hit.cls == MaskClass::line) && ball_center) {
        const double dx = hit.point.x - ball_center->x, dy = hit.point.y - ball_center->y;
        const double dist = std::hypot(dx, dy);
        const double reach = 1.3 * cfg.ball_radius;
        if (dist < reach) {
          const double f = 0.55 + 0.45 * (dist / reach);
          r *= f;
          g *= f;
          b *= f;
        }
      }

      img.at(px, py, 0) = clamp8(cfg.lighting_gain * r + cfg.lighting_offset);
      img.at(px, py, 1) = clamp8(cfg.lighting_gain * g + cfg.lighting_offset);
      img.at(px, py, 2) = clamp8(cfg.lighting_gain * b + cfg.lighting_offset);
      truth.mask.at(px, py) = uint8_t(hit.cls);

      switch (hit.cls) {
        case MaskClass::ball:
          ++truth.ball_pixels;
          break;
        case MaskClass::post:
          if (hit.object >= 0) ++post_count[size_t(hit.object)];
          break;
        case MaskClass::line:
          if (ground_circle) {
            ++truth.circle_pixels;
          } else if (ground_seg >= 0) {
            SegAccum& a = seg_accum[size_t(ground_seg)];
            ++a.count;
            a.tmin = std::min(a.tmin, ground_seg_t);
            a.tmax = std::max(a.tmax, ground_seg_t);
          }
          break;
        default:
          break;
      }
    }
  }

  box_blur_rgb(img, cfg.blur_radius);

  if (ball_center) {
    truth.ball_ego = Vec2{ball_center->x, ball_center->y};
    try {
      const Vec2 c = view.project_point(*ball_center);
      const Vec3 to_ball = *ball_center - origin;
      const Vec3 lateral = to_ball.cross({0, 0, 1}).normalized();
      const Vec2 edge = view.project_point(*ball_center + lateral * cfg.ball_radius);
      truth.ball_pixel = c;
      truth.ball_pixel_radius = (edge - c).norm();
    } catch (const Error&) {
    }
  }
  for (size_t pi = 0; pi < posts_ego.size(); ++pi)
    if (post_count[pi] >= 50) {
      truth.post_ego.push_back(posts_ego[pi]);
      truth.post_pixels.push_back(post_count[pi]);
    }
  if (truth.circle_pixels >= 50)
    truth.circle_ego = field_to_ego(cfg.robot_pose, field.circle_center);
  for (size_t si = 0; si < segs.size(); ++si) {
    const SegAccum& a = seg_accum[si];
    if (a.count < 50 || a.tmax < a.tmin) continue;
    VisibleSegment vs;
    vs.segment_index = int(si);
    const Vec2 w0 = segs[si].p0 + segs[si].dir * (a.tmin * segs[si].length);
    const Vec2 w1 = segs[si].p0 + segs[si].dir * (a.tmax * segs[si].length);
    vs.ego = LineSegment2D{field_to_ego(cfg.robot_pose, w0), field_to_ego(cfg.robot_pose, w1),
                           Frame::egocentric};
    vs.mask_pixels = a.count;
    truth.segments.push_back(vs);
  }

  return {std::move(img), std::move(truth)};
}

std::vector<OdometryDelta> make_odometry(const std::vector<Pose2D>& poses,
                                         const TrajectoryOptions& opts) {
  if (poses.empty()) throw EmptyInputError("make_odometry: no poses");
  std::mt19937_64 rng(splitmix(opts.seed ^ 0x4F444F4DULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<OdometryDelta> out;
  out.reserve(poses.size());
  out.push_back({});
  for (size_t i = 1; i < poses.size(); ++i) {
    // Noise is drawn even for kidnap frames to keep the stream alignment fixed.
    const double n0 = gauss(rng), n1 = gauss(rng), n2 = gauss(rng);
    if (std::find(opts.kidnap_frames.begin(), opts.kidnap_frames.end(), int(i)) !=
        opts.kidnap_frames.end()) {
      out.push_back({});
      continue;
    }
    const Pose2D& a = poses[i - 1];
    const Pose2D& b = poses[i];
    const double c = std::cos(-a.theta), s = std::sin(-a.theta);
    const double wx = b.x - a.x, wy = b.y - a.y;
    OdometryDelta d;
    d.dx = (c * wx - s * wy) * (1.0 + opts.odo_noise * n0);
    d.dy = (s * wx + c * wy) * (1.0 + opts.odo_noise * n1);
    d.dtheta = angle_diff(b.theta, a.theta) * (1.0 + opts.odo_noise * n2);
    out.push_back(d);
  }
  return out;
}

std::vector<TrajectoryFrame> render_trajectory(const std::vector<Pose2D>& poses,
                                               const SceneConfig& base, const CameraModel& cam,
                                               const FieldSpec& spec,
                                               const TrajectoryOptions& opts) {
  const std::vector<OdometryDelta> odo = make_odometry(poses, opts);
  std::mt19937_64 mag_rng(splitmix(opts.seed ^ 0x4D41474EULL));
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<TrajectoryFrame> frames;
  frames.reserve(poses.size());
  for (size_t i = 0; i < poses.size(); ++i) {
    SceneConfig cfg = base;
    cfg.robot_pose = poses[i];
    cfg.seed = splitmix(base.seed ^ (0x46524D00ULL + i));
    TrajectoryFrame f;
    auto rendered = render(cfg, cam, spec);
    f.image = std::move(rendered.first);
    f.truth = std::move(rendered.second);
    f.odometry = odo[i];
    f.magnetometer = normalize_angle(poses[i].theta + opts.mag_bias + opts.mag_noise * gauss(mag_rng));
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<CalibObservation> make_calib_observations(
    const CameraModel& cam, const std::vector<ExtrinsicChain>& chain_states,
    const std::vector<Vec2>& ego_points, const Transform3& true_correction, double pixel_noise,
    uint64_t seed) {
  if (chain_states.empty() || ego_points.empty())
    throw EmptyInputError("make_calib_observations: empty states or points");
  std::mt19937_64 rng(splitmix(seed ^ 0x43414C42ULL));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<CalibObservation> out;
  for (const auto& state : chain_states) {
    ExtrinsicChain true_chain = state;
    true_chain.correction = true_chain.correction.compose(true_correction);
    const CameraModel true_cam = cam.with_chain(true_chain);
    for (const auto& p : ego_points) {
      Vec2 px;
      try {
        px = true_cam.ground_to_pixel(p);
      } catch (const Error&) {
        continue;
      }
      px.x += pixel_noise * gauss(rng);
      px.y += pixel_noise * gauss(rng);
      if (!cam.intrinsics().contains(px)) continue;
      out.push_back({px, p, state});
    }
  }
  return out;
}

}  // namespace fv
