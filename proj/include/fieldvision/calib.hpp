#pragma once

#include <array>
#include <functional>
#include <vector>

#include "fieldvision/camera.hpp"

namespace fv {

struct NmOptions {
  double tol = 1e-14;        // terminate when max-min function value over the simplex drops below
  int max_iter = 4000;       // objective evaluations budget per run
};

struct NmResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Downhill simplex with the standard reflection/expansion/contraction/shrink
// coefficients (1, 2, 0.5, 0.5). steps gives the per-dimension offsets used to
// build the initial simplex around x0.
NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                     const std::vector<double>& x0, const std::vector<double>& steps,
                     const NmOptions& opts = {});

// One pixel observation of a landmark at a known egocentric ground position,
// taken while the kinematic chain was in the recorded state.
struct CalibObservation {
  Vec2 pixel;
  Vec2 true_world;
  ExtrinsicChain chain_state;
};

struct CalibOptions {
  double trust_translation = 0.05;          // meters, per axis
  double trust_rotation = 15.0 * M_PI / 180.0;  // radians, per axis
  double step_translation = 0.01;
  double step_rotation = 2.0 * M_PI / 180.0;
  double miss_penalty = 10.0;  // squared-meter cost for rays missing the ground
  NmOptions nm;
};

// Mean squared egocentric error of projecting each observation's pixel to the
// ground under the chain with the candidate correction appended. params is the
// 6-vector (x, y, z, roll, pitch, yaw) of correction_from_array.
double reprojection_cost(const std::array<double, 6>& params,
                         const std::vector<CalibObservation>& observations,
                         const CameraModel& cam, const CalibOptions& opts = {});

struct CalibReport {
  double before_cost = 0.0;
  double after_cost = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Estimates the 6-DoF camera correction from zero start. The result stays
// inside the trust region and never scores worse than the zero correction.
std::pair<std::array<double, 6>, CalibReport> calibrate_extrinsics(
    const std::vector<CalibObservation>& observations, const CameraModel& cam,
    const CalibOptions& opts = {});

}  // namespace fv
