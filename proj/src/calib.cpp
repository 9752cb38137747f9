#include "fieldvision/calib.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace fv {

NmResult nelder_mead(const std::function<double(const std::vector<double>&)>& objective,
                     const std::vector<double>& x0, const std::vector<double>& steps,
                     const NmOptions& opts) {
  const size_t n = x0.size();
  if (n == 0) throw EmptyInputError("nelder_mead: empty start point");
  if (steps.size() != n) throw ShapeError("nelder_mead: steps dimension mismatch");
  if (opts.tol <= 0.0) throw ConfigError("nelder_mead: tol must be positive");

  struct Vertex {
    std::vector<double> x;
    double f;
  };
  std::vector<Vertex> simplex;
  simplex.reserve(n + 1);
  simplex.push_back({x0, objective(x0)});
  for (size_t i = 0; i < n; ++i) {
    std::vector<double> x = x0;
    x[i] += steps[i];
    simplex.push_back({x, objective(x)});
  }
  int evals = int(n) + 1;

  auto order = [&simplex] {
    std::stable_sort(simplex.begin(), simplex.end(),
                     [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
  };
  order();

  bool converged = false;
  while (evals < opts.max_iter) {
    if (simplex.back().f - simplex.front().f < opts.tol) {
      converged = true;
      break;
    }
    // Centroid of all but the worst vertex.
    std::vector<double> c(n, 0.0);
    for (size_t v = 0; v < n; ++v)
      for (size_t i = 0; i < n; ++i) c[i] += simplex[v].x[i];
    for (size_t i = 0; i < n; ++i) c[i] /= double(n);

    const Vertex& worst = simplex.back();
    auto blend = [&](double t) {
      std::vector<double> x(n);
      for (size_t i = 0; i < n; ++i) x[i] = c[i] + t * (c[i] - worst.x[i]);
      return x;
    };

    std::vector<double> xr = blend(1.0);
    const double fr = objective(xr);
    ++evals;

    if (fr < simplex.front().f) {
      std::vector<double> xe = blend(2.0);
      const double fe = objective(xe);
      ++evals;
      simplex.back() = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
    } else if (fr < simplex[n - 1].f) {
      simplex.back() = {xr, fr};
    } else {
      const bool outside = fr < worst.f;
      std::vector<double> xc = blend(outside ? 0.5 : -0.5);
      const double fc = objective(xc);
      ++evals;
      if (fc < std::min(fr, worst.f)) {
        simplex.back() = {xc, fc};
      } else {
        // Shrink toward the best vertex.
        for (size_t v = 1; v <= n; ++v) {
          for (size_t i = 0; i < n; ++i)
            simplex[v].x[i] = simplex[0].x[i] + 0.5 * (simplex[v].x[i] - simplex[0].x[i]);
          simplex[v].f = objective(simplex[v].x);
          ++evals;
        }
      }
    }
    order();
  }
  order();
  return {simplex.front().x, simplex.front().f, evals, converged};
}

namespace {

double soft_bound_penalty(const std::array<double, 6>& params, const CalibOptions& opts) {
  double p = 0.0;
  for (int i = 0; i < 3; ++i) {
    const double over = std::abs(params[size_t(i)]) - opts.trust_translation;
    if (over > 0.0) p += 1e6 * over * over;
  }
  for (int i = 3; i < 6; ++i) {
    const double over = std::abs(params[size_t(i)]) - opts.trust_rotation;
    if (over > 0.0) p += 1e6 * over * over;
  }
  return p;
}

void check_observations(const std::vector<CalibObservation>& observations) {
  if (observations.size() < 6)
    throw InsufficientDataError("calibration needs at least 6 observations");
  std::set<std::array<double, 4>> states;
  for (const auto& o : observations)
    states.insert({o.chain_state.trunk_roll, o.chain_state.trunk_pitch, o.chain_state.neck_pan,
                   o.chain_state.neck_tilt});
  if (states.size() < 2)
    throw InsufficientDataError("calibration needs observations from at least 2 chain states");
}

}  // namespace

double reprojection_cost(const std::array<double, 6>& params,
                         const std::vector<CalibObservation>& observations,
                         const CameraModel& cam, const CalibOptions& opts) {
  check_observations(observations);
  const Transform3 correction = correction_from_array(params);
  double sum = 0.0;
  for (const auto& obs : observations) {
    ExtrinsicChain chain = obs.chain_state;
    chain.correction = chain.correction.compose(correction);
    const CameraModel view = cam.with_chain(chain);
    try {
      const Vec2 g = view.pixel_to_ground(obs.pixel);
      sum += (g - obs.true_world).squared_norm();
    } catch (const Error&) {
      sum += opts.miss_penalty;
    }
  }
  return sum / double(observations.size());
}

std::pair<std::array<double, 6>, CalibReport> calibrate_extrinsics(
    const std::vector<CalibObservation>& observations, const CameraModel& cam,
    const CalibOptions& opts) {
  check_observations(observations);

  auto objective = [&](const std::vector<double>& x) {
    std::array<double, 6> p;
    std::copy_n(x.begin(), 6, p.begin());
    return reprojection_cost(p, observations, cam, opts) + soft_bound_penalty(p, opts);
  };

  const std::vector<double> steps{opts.step_translation, opts.step_translation,
                                  opts.step_translation, opts.step_rotation, opts.step_rotation,
                                  opts.step_rotation};
  NmResult best = nelder_mead(objective, std::vector<double>(6, 0.0), steps, opts.nm);
  // Polishing pass from the incumbent with a tighter simplex.
  std::vector<double> fine(steps);
  for (double& s : fine) s *= 0.05;
  NmResult polish = nelder_mead(objective, best.x, fine, opts.nm);
  if (polish.f <= best.f) {
    polish.iterations += best.iterations;
    polish.converged = polish.converged && best.converged;
    best = polish;
  }

  std::array<double, 6> params;
  std::copy_n(best.x.begin(), 6, params.begin());
  for (int i = 0; i < 3; ++i)
    params[size_t(i)] =
        std::clamp(params[size_t(i)], -opts.trust_translation, opts.trust_translation);
  for (int i = 3; i < 6; ++i)
    params[size_t(i)] = std::clamp(params[size_t(i)], -opts.trust_rotation, opts.trust_rotation);

  CalibReport report;
  report.before_cost = reprojection_cost({0, 0, 0, 0, 0, 0}, observations, cam, opts);
  report.after_cost = reprojection_cost(params, observations, cam, opts);
  report.iterations = best.iterations;
  report.converged = best.converged;
  if (report.after_cost > report.before_cost) {
    params = {0, 0, 0, 0, 0, 0};
    report.after_cost = report.before_cost;
  }
  return {params, report};
}

}  // namespace fv
