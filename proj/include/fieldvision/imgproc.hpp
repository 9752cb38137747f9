#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "fieldvision/geometry.hpp"
#include "fieldvision/image.hpp"

namespace fv {

// ---------------------------------------------------------------- color

// Standard hexcone RGB -> HSV with H stored as 0..179 (degrees / 2),
// S and V in 0..255.
Image rgb_to_hsv(const Image& rgb);

// Inclusive box in HSV space; hue wraps when h_min > h_max.
struct HsvBox {
  int h_min = 0, h_max = 179;
  int s_min = 0, s_max = 255;
  int v_min = 0, v_max = 255;

  void validate() const;
  bool contains(uint8_t h, uint8_t s, uint8_t v) const;
};

struct ColorThresholds {
  HsvBox green{35, 85, 60, 255, 40, 220};
  HsvBox white{0, 179, 0, 70, 160, 255};
};

// Per-pixel classification into {other, green, white}; green wins ties.
Image classify_colors(const Image& hsv, const ColorThresholds& lut);

// Single-label binary mask (0/255) from a label image.
Image label_mask(const Image& labels, Label which);

// ---------------------------------------------------------------- regions

struct PixelCoord {
  int x = 0;
  int y = 0;
};

struct Component {
  std::vector<PixelCoord> pixels;
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;

  int area() const { return static_cast<int>(pixels.size()); }
  int bbox_width() const { return max_x - min_x + 1; }
  int bbox_height() const { return max_y - min_y + 1; }
};

// Foreground components of a binary image, sorted by area descending.
std::vector<Component> connected_components(const Image& binary, int connectivity = 8);

// Pixels of a component adjacent to its exterior (hole boundaries excluded),
// ordered by a contour walk around the outside.
std::vector<PixelCoord> outer_contour(const Component& comp, int width, int height);

// ---------------------------------------------------------------- polygons

// Minimal counter-clockwise convex polygon containing the input points;
// collinear intermediate vertices are dropped. Degenerate inputs yield the
// deduplicated point or segment. Throws EmptyInputError on empty input.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

// Ramer-Douglas-Peucker polyline simplification. Endpoints are preserved and
// every discarded point lies within epsilon of the simplified polyline.
std::vector<Vec2> rdp_simplify(const std::vector<Vec2>& polyline, double epsilon);

double point_segment_distance(const Vec2& p, const Vec2& a, const Vec2& b);

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& polygon);

// Inserts evenly spaced points along each edge so no two consecutive vertices
// are farther apart than step. Endpoints are preserved.
std::vector<Vec2> densify_polyline(const std::vector<Vec2>& polyline, double step);

// Exact Euclidean distance from every foreground pixel to the nearest
// background pixel (0 on background). Pixels touching the image border are
// treated as adjacent to background.
std::vector<double> distance_transform(const Image& binary);

// ---------------------------------------------------------------- edges

struct CannyParams {
  double low = 40.0;
  double high = 90.0;
  double sigma = 1.0;  // Gaussian pre-smoothing; 0 disables
};

// Canny edge detector: Gaussian smoothing, Sobel gradients, non-maximum
// suppression, hysteresis. Output is a binary image of 1-px-wide ridges.
Image canny(const Image& gray, const CannyParams& params);

// ---------------------------------------------------------------- Hough

struct HoughParams {
  double min_length = 25.0;   // pixels
  double max_gap = 4.0;       // pixels
  int vote_threshold = 20;    // supporting edge pixels
  double rho_resolution = 1.0;
  double theta_resolution_deg = 1.0;
};

// Progressive probabilistic Hough transform. Edge pixels are visited in a
// seeded random order; every returned segment is supported by at least
// vote_threshold edge pixels within 1.5 px and is at least min_length long.
std::vector<LineSegment2D> hough_segments(const Image& edges, const HoughParams& params,
                                          uint64_t seed);

// ---------------------------------------------------------------- histograms

enum class HsvChannel : uint8_t { H = 0, S = 1, V = 2 };

struct Histogram {
  std::vector<double> bins;
  HsvChannel channel = HsvChannel::H;

  double sum() const;
  void normalize();  // throws EmptyInputError if the histogram is all zero
};

struct HistogramBins {
  int h = 30;
  int s = 16;
  int v = 16;
};

// Normalized per-channel histograms over the masked pixels.
// Throws EmptyInputError if the mask selects no pixels.
std::array<Histogram, 3> hsv_histogram(const Image& hsv, const Image& mask,
                                       const HistogramBins& bins);

// d = sqrt(1 - sum_i sqrt(a_i * b_i)) for normalized histograms.
double bhattacharyya_distance(const Histogram& a, const Histogram& b);

// ---------------------------------------------------------------- HOG

struct HogLayout {
  int cell_size = 8;
  int bins = 9;
};

struct HogDescriptor {
  std::vector<double> values;  // cells_x * cells_y * bins
  int cells_x = 0;
  int cells_y = 0;
  int bins = 0;
};

// Dense HOG over a gray patch: unsigned gradient orientations in [0, 180)
// voted with bilinear interpolation between adjacent bins, each cell block
// L2-normalized. Patch dimensions must be divisible by the cell size.
HogDescriptor hog_descriptor(const Image& patch, const HogLayout& layout);

// ---------------------------------------------------------------- circle fit

struct CircleFit {
  Vec2 center;
  double radius = 0.0;
  double arc_coverage = 0.0;  // fraction of 36 angular sectors holding an inlier
};

// Algebraic least-squares circle fit with sector-based arc coverage.
// Returns nothing when the fitted radius falls outside [r_min, r_max].
// Throws InsufficientDataError for fewer than 6 points.
std::optional<CircleFit> fit_circle_arc(const std::vector<Vec2>& points, double r_min,
                                        double r_max);

// ---------------------------------------------------------------- patches

Image extract_gray(const Image& src);          // rgb8/hsv8 V channel or gray copy
Image crop(const Image& src, int x0, int y0, int w, int h);  // edge-replicated
Image resize_bilinear(const Image& gray, int out_w, int out_h);
Image mirror_horizontal(const Image& img);
// Rotation about the patch center, bilinear sampling, edge-replicate padding.
Image rotate_bilinear(const Image& gray, double angle_rad);
Image box_blur(const Image& img, int radius);

}  // namespace fv
