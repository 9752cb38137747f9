#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fieldvision/detect.hpp"

namespace fv {

Histogram disk_histogram(const Image& hsv, const Vec2& center, double radius, HsvChannel channel,
                         int bins) {
  Histogram h;
  h.channel = channel;
  h.bins.assign(size_t(bins), 0.0);
  const int range = channel == HsvChannel::H ? 180 : 256;
  const int x0 = std::max(0, int(std::floor(center.x - radius)));
  const int x1 = std::min(hsv.width - 1, int(std::ceil(center.x + radius)));
  const int y0 = std::max(0, int(std::floor(center.y - radius)));
  const int y1 = std::min(hsv.height - 1, int(std::ceil(center.y + radius)));
  int count = 0;
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - center.x, dy = y - center.y;
      if (dx * dx + dy * dy > radius * radius) continue;
      const int v = hsv.at(x, y, int(channel));
      ++h.bins[size_t(std::min(bins - 1, v * bins / range))];
      ++count;
    }
  if (count == 0) {
    std::fill(h.bins.begin(), h.bins.end(), 1.0 / bins);
    return h;
  }
  h.normalize();
  return h;
}

namespace {

// Pixel radius a resting ball should have, given the ray through its image center.
double expected_ball_radius(const CameraModel& cam, const Vec2& center_px, double ball_radius_m) {
  const Vec2 g = cam.pixel_to_ground(center_px);
  const Vec3 origin = cam.pose().translation;
  if (origin.z <= ball_radius_m) throw NoGroundError("camera below ball height");
  const double s = 1.0 - ball_radius_m / origin.z;
  const Vec3 center{origin.x + s * (g.x - origin.x), origin.y + s * (g.y - origin.y),
                    ball_radius_m};
  const Vec3 lateral = (center - origin).cross({0, 0, 1}).normalized();
  const Vec2 c = cam.project_point(center);
  const Vec2 e = cam.project_point(center + lateral * ball_radius_m);
  return (e - c).norm();
}

// Size, color and patch gates shared by both candidate sources.
std::optional<BallCandidate> gated_candidate(const Vec2& center, double radius, double coverage,
                                             const Image& hsv, const Image& gray,
                                             const std::array<Histogram, 3>& reference,
                                             const CameraModel& cam, const DetectorConfig& cfg) {
  double expected = 0;
  try {
    expected = expected_ball_radius(cam, center, cfg.ball_radius_m);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (radius < expected * (1.0 - cfg.radius_tol) || radius > expected * (1.0 + cfg.radius_tol))
    return std::nullopt;

  double mean_distance = 0;
  const HsvChannel channels[3] = {HsvChannel::H, HsvChannel::S, HsvChannel::V};
  const int bin_counts[3] = {cfg.hist_bins.h, cfg.hist_bins.s, cfg.hist_bins.v};
  for (int c = 0; c < 3; ++c) {
    const Histogram h = disk_histogram(hsv, center, radius * 0.9, channels[c], bin_counts[c]);
    mean_distance += bhattacharyya_distance(h, reference[size_t(c)]);
  }
  mean_distance /= 3.0;
  if (mean_distance > cfg.hist_distance_threshold) return std::nullopt;

  BallCandidate cand;
  cand.center = center;
  cand.radius = radius;
  cand.arc_coverage = coverage;
  cand.histogram_distance = mean_distance;
  const int side = std::max(8, int(std::lround(2.5 * radius)));
  const Image patch = crop(gray, int(std::lround(center.x)) - side / 2,
                           int(std::lround(center.y)) - side / 2, side, side);
  cand.patch = resize_bilinear(patch, cfg.patch_size, cfg.patch_size);
  return cand;
}

}  // namespace

std::vector<BallCandidate> detect_ball_candidates(const Image& hsv, const Image& labels,
                                                  const FieldBoundary& boundary,
                                                  const std::array<Histogram, 3>& reference,
                                                  const CameraModel& cam,
                                                  const DetectorConfig& cfg) {
  std::vector<BallCandidate> out;
  if (boundary.polygon.size() < 3) return out;
  const Image white = label_mask(labels, Label::white);
  const Image gray = extract_gray(hsv);
  const auto comps = connected_components(white);
  const double min_area = M_PI * cfg.min_candidate_radius_px * cfg.min_candidate_radius_px;

  for (const auto& comp : comps) {
    if (comp.area() < int(min_area)) break;
    const Vec2 centroid{(comp.min_x + comp.max_x) * 0.5, (comp.min_y + comp.max_y) * 0.5};
    const Vec2 bottom{centroid.x, double(comp.max_y)};
    if (!boundary.contains(centroid) && !boundary.contains(bottom)) continue;

    auto contour = outer_contour(comp, labels.width, labels.height);
    if (contour.size() < 6) continue;
    std::vector<Vec2> poly;
    poly.reserve(contour.size() + 1);
    for (const auto& p : contour) poly.push_back({double(p.x), double(p.y)});
    poly.push_back(poly.front());
    const auto points = densify_polyline(rdp_simplify(poly, cfg.candidate_rdp_px), 2.0);
    if (points.size() < 6) continue;

    std::optional<CircleFit> fit =
        fit_circle_arc(points, cfg.min_candidate_radius_px, double(labels.height) / 3.0);
    if (!fit || fit->arc_coverage < cfg.min_arc_coverage) continue;

    if (auto cand =
            gated_candidate(fit->center, fit->radius, fit->arc_coverage, hsv, gray, reference, cam, cfg))
      out.push_back(std::move(*cand));
  }

  // A ball resting on a marking merges with the line network into one
  // component whose outline defeats the circle fit. Lines are thin, so the
  // widest inscribed disks of the non-green area still single the ball out.
  const Image field_mask = rasterize_polygon(boundary.polygon, labels.width, labels.height, 0);
  Image nongreen(labels.width, labels.height, PixelFormat::binary);
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x)
      nongreen.at(x, y) =
          field_mask.at(x, y) && label_at(labels, x, y) != Label::green ? 255 : 0;
  const std::vector<double> dt = distance_transform(nongreen);

  struct Peak {
    double d;
    int x, y;
  };
  std::vector<Peak> cells;
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x) {
      const double d = dt[size_t(y) * labels.width + x];
      if (d >= cfg.min_candidate_radius_px) cells.push_back({d, x, y});
    }
  std::sort(cells.begin(), cells.end(), [](const Peak& a, const Peak& b) {
    if (a.d != b.d) return a.d > b.d;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  std::vector<Peak> peaks;
  for (const Peak& c : cells) {
    if (peaks.size() >= 12) break;
    bool taken = false;
    for (const Peak& p : peaks) {
      const double dx = c.x - p.x, dy = c.y - p.y;
      if (dx * dx + dy * dy < 4.0 * p.d * p.d) {
        taken = true;
        break;
      }
    }
    for (const BallCandidate& prev : out) {
      if (taken) break;
      const double r = std::max(c.d, prev.radius);
      if ((Vec2{double(c.x), double(c.y)} - prev.center).norm() < r) taken = true;
    }
    if (!taken) peaks.push_back(c);
  }

  for (const Peak& pk : peaks) {
    const Vec2 center{double(pk.x), double(pk.y)};
    const double escape = 2.5 * pk.d + 4.0;
    double exits[36];
    std::vector<double> bounded;
    for (int a = 0; a < 36; ++a) {
      const double ang = a * (2.0 * M_PI / 36.0);
      const double ca = std::cos(ang), sa = std::sin(ang);
      double r = std::max(0.0, pk.d - 1.0);
      while (r < escape) {
        const int px = int(std::lround(center.x + ca * r));
        const int py = int(std::lround(center.y + sa * r));
        if (!nongreen.in_bounds(px, py) || !nongreen.at(px, py)) break;
        r += 1.0;
      }
      exits[a] = r;
      // Rays escaping along an attached line say nothing about the disk edge.
      if (r < escape) bounded.push_back(r);
    }
    if (bounded.size() < 12) continue;
    std::nth_element(bounded.begin(), bounded.begin() + long(bounded.size() / 2), bounded.end());
    const double radius = bounded[bounded.size() / 2];
    int covered = 0;
    for (double r : exits)
      if (std::abs(r - radius) <= std::max(2.0, 0.25 * radius)) ++covered;
    const double coverage = covered / 36.0;
    if (coverage < cfg.min_arc_coverage) continue;

    if (auto cand = gated_candidate(center, radius, coverage, hsv, gray, reference, cam, cfg))
      out.push_back(std::move(*cand));
  }
  return out;
}

namespace {

struct Sample {
  std::vector<double> features;
  bool positive = false;
  double weight = 0.0;
  double score = 0.0;
  bool active = true;
};

double stump_response(const ClassifierStump& s, const std::vector<double>& f) {
  const bool above = f[s.feature] > s.threshold;
  return (above == (s.polarity > 0)) ? 1.0 : -1.0;
}

// Exhaustive weighted stump search over all features and split points.
ClassifierStump best_stump(std::vector<Sample>& samples,
                           const std::vector<std::vector<uint32_t>>& order, size_t n_features,
                           double& best_error) {
  ClassifierStump best;
  best_error = 1.0;
  for (size_t f = 0; f < n_features; ++f) {
    // Total positive/negative weight, then a sweep moving samples below the split.
    double wp = 0, wn = 0;
    for (const Sample& s : samples)
      if (s.active) (s.positive ? wp : wn) += s.weight;
    double below_p = 0, below_n = 0;
    double prev_value = 0;
    bool have_prev = false;
    for (uint32_t idx : order[f]) {
      const Sample& s = samples[idx];
      if (!s.active) continue;
      const double v = s.features[f];
      if (have_prev && v > prev_value) {
        // Threshold between prev_value and v, predict positive above.
        const double err_pos_above = below_p + (wn - below_n);
        for (int pol = 0; pol < 2; ++pol) {
          const double err = pol == 0 ? err_pos_above : (wp + wn) - err_pos_above;
          if (err < best_error) {
            best_error = err;
            best.feature = uint32_t(f);
            best.threshold = 0.5 * (prev_value + v);
            best.polarity = pol == 0 ? 1.0 : -1.0;
          }
        }
      }
      (s.positive ? below_p : below_n) += s.weight;
      prev_value = v;
      have_prev = true;
    }
  }
  return best;
}

}  // namespace

BallClassifier train_ball_classifier(const std::vector<Image>& positives,
                                     const std::vector<Image>& negatives,
                                     const TrainOptions& opts) {
  if (positives.empty() || negatives.empty())
    throw InsufficientDataError("train_ball_classifier: empty sample set");

  BallClassifier model;
  model.patch_size = positives.front().width;

  std::vector<Sample> samples;
  for (const Image& p : positives)
    for (const Image& aug : augment_positive(p)) {
      Sample s;
      s.features = hog_descriptor(aug, model.hog).values;
      s.positive = true;
      samples.push_back(std::move(s));
    }
  const size_t n_pos = samples.size();
  for (const Image& n : negatives) {
    Image patch = n;
    if (patch.width != model.patch_size || patch.height != model.patch_size)
      patch = resize_bilinear(patch, model.patch_size, model.patch_size);
    Sample s;
    s.features = hog_descriptor(patch, model.hog).values;
    s.positive = false;
    samples.push_back(std::move(s));
  }
  const size_t n_neg = samples.size() - n_pos;
  if (n_pos < 50) throw InsufficientDataError("need at least 50 positives after augmentation");
  if (n_neg < 200) throw InsufficientDataError("need at least 200 negatives");

  const size_t n_features = samples.front().features.size();
  std::vector<std::vector<uint32_t>> order(n_features);
  for (size_t f = 0; f < n_features; ++f) {
    order[f].resize(samples.size());
    std::iota(order[f].begin(), order[f].end(), 0u);
    std::stable_sort(order[f].begin(), order[f].end(), [&](uint32_t a, uint32_t b) {
      return samples[a].features[f] < samples[b].features[f];
    });
  }

  for (int n_stumps : opts.stumps_per_stage) {
    size_t active_pos = 0, active_neg = 0;
    for (const Sample& s : samples)
      if (s.active) (s.positive ? active_pos : active_neg) += 1;
    if (active_neg == 0) break;  // nothing left to reject

    for (Sample& s : samples) {
      if (!s.active) continue;
      s.weight = s.positive ? 0.5 / double(active_pos) : 0.5 / double(active_neg);
      s.score = 0.0;
    }

    ClassifierStage stage;
    for (int k = 0; k < n_stumps; ++k) {
      double err = 1.0;
      ClassifierStump stump = best_stump(samples, order, n_features, err);
      if (k == 0 && 1.0 - err < 0.6)
        throw TrainingError("stage cannot separate positives from negatives");
      err = std::clamp(err, 1e-10, 1.0 - 1e-10);
      stump.alpha = 0.5 * std::log((1.0 - err) / err);
      stage.stumps.push_back(stump);

      double wsum = 0;
      for (Sample& s : samples) {
        if (!s.active) continue;
        const double h = stump_response(stump, s.features);
        const double y = s.positive ? 1.0 : -1.0;
        s.weight *= std::exp(-stump.alpha * y * h);
        s.score += stump.alpha * h;
        wsum += s.weight;
      }
      for (Sample& s : samples)
        if (s.active) s.weight /= wsum;
    }

    // Stage threshold keeping at least the requested share of positives.
    std::vector<double> pos_scores;
    for (const Sample& s : samples)
      if (s.active && s.positive) pos_scores.push_back(s.score);
    std::sort(pos_scores.begin(), pos_scores.end());
    const size_t drop = size_t((1.0 - opts.stage_pass_rate) * double(pos_scores.size()));
    stage.threshold = pos_scores[std::min(drop, pos_scores.size() - 1)] - 1e-9;

    for (Sample& s : samples)
      if (s.active && s.score < stage.threshold) s.active = false;
    model.stages.push_back(std::move(stage));
  }
  return model;
}

ClassifyResult classify_ball(const Image& patch, const BallClassifier& model) {
  Image p = patch;
  if (p.width != model.patch_size || p.height != model.patch_size)
    p = resize_bilinear(p, model.patch_size, model.patch_size);
  const std::vector<double> f = hog_descriptor(p, model.hog).values;

  const bool all_zero = std::all_of(f.begin(), f.end(), [](double v) { return v == 0.0; });
  if (all_zero) return {false, -1.0};

  double min_margin = 1e30;
  for (const auto& stage : model.stages) {
    double score = 0;
    for (const auto& stump : stage.stumps) score += stump.alpha * stump_response(stump, f);
    const double margin = score - stage.threshold;
    min_margin = std::min(min_margin, margin);
    if (score < stage.threshold) return {false, margin};
  }
  return {true, min_margin};
}

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  uint8_t b[4] = {uint8_t(v), uint8_t(v >> 8), uint8_t(v >> 16), uint8_t(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  uint64_t u;
  std::memcpy(&u, &v, 8);
  uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = uint8_t(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t get_u32(std::istream& is) {
  uint8_t b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw FormatError("classifier file truncated");
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

double get_f64(std::istream& is) {
  uint8_t b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw FormatError("classifier file truncated");
  uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void save_classifier(const BallClassifier& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write classifier file: " + path);
  os.write("NBLC", 4);
  put_u32(os, 1);
  put_u32(os, uint32_t(model.patch_size));
  put_u32(os, uint32_t(model.hog.cell_size));
  put_u32(os, uint32_t(model.hog.bins));
  put_u32(os, uint32_t(model.stages.size()));
  for (const auto& stage : model.stages) {
    put_u32(os, uint32_t(stage.stumps.size()));
    put_f64(os, stage.threshold);
    for (const auto& s : stage.stumps) {
      put_f64(os, double(s.feature));
      put_f64(os, s.threshold);
      put_f64(os, s.polarity);
      put_f64(os, s.alpha);
    }
  }
  if (!os) throw IoError("failed writing classifier file: " + path);
}

BallClassifier load_classifier(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read classifier file: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "NBLC", 4) != 0)
    throw FormatError("not a classifier file: " + path);
  const uint32_t version = get_u32(is);
  if (version != 1) throw FormatError("unsupported classifier version");
  BallClassifier model;
  model.patch_size = int(get_u32(is));
  model.hog.cell_size = int(get_u32(is));
  model.hog.bins = int(get_u32(is));
  const uint32_t n_stages = get_u32(is);
  if (n_stages > 1000) throw FormatError("implausible stage count");
  for (uint32_t i = 0; i < n_stages; ++i) {
    ClassifierStage stage;
    const uint32_t n_stumps = get_u32(is);
    if (n_stumps > 100000) throw FormatError("implausible stump count");
    stage.threshold = get_f64(is);
    for (uint32_t k = 0; k < n_stumps; ++k) {
      ClassifierStump s;
      s.feature = uint32_t(get_f64(is));
      s.threshold = get_f64(is);
      s.polarity = get_f64(is);
      s.alpha = get_f64(is);
      stage.stumps.push_back(s);
    }
    model.stages.push_back(std::move(stage));
  }
  return model;
}

}  // namespace fv
