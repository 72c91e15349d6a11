#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "looptrack/transform2d.hpp"

namespace looptrack {

struct FitOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-14;
  double step_tolerance = 1e-10;
  double relative_reduction_tolerance = 1e-12;
  double e2_tolerance = 1e-26;
  double initial_damping = 1e-3;
  double damping_up = 10.0;
  double damping_down = 10.0;
  int multistart_phases = 5;
  /// Mean normalized squared residual above which fit_curve tries every start.
  double multistart_threshold = 1e-20;
};

struct FitResult {
  CurveModel model;
  double e2 = 0.0;  // normalized sum of squares
  int iterations = 0;
  bool converged = false;
  std::vector<double> e2_trace;  // initial value, then one entry per accepted step
};

/// Residuals divided by length_scale^degree (the ellipse form is already
/// dimensionless and is left as is).
/// Implicit residuals divided by S^degree, S the RMS radius of the points
/// (the ellipse form is left as is). S is fixed by the data, so the objective
/// is the plain algebraic E^2 up to a constant and has no scale degeneracy.
std::vector<double> normalized_residuals(const CurveModel& model, std::span<const Point2> points);
double normalized_e2(const CurveModel& model, std::span<const Point2> points);

/// Centroid, scale and principal-axis start for the given family.
CurveModel initial_guess(CurveFamily family, std::span<const Point2> points);

/// Single Levenberg-Marquardt run from `init` over (log a, [log b], theta, x0, y0).
FitResult lm_fit(CurveFamily family, std::span<const Point2> points, const CurveModel& init,
                 const FitOptions& opts = {});

/// initial_guess + lm_fit, with theta multi-start over the symmetry sector
/// when the first run does not reach an exact fit. Result is canonicalized.
FitResult fit_curve(CurveFamily family, std::span<const Point2> points, const FitOptions& opts = {});

struct ParamRange {
  double lo = 0.0;
  double hi = 0.0;
};

struct GridBounds {
  ParamRange a, b, theta, x0, y0;  // b ignored for arity-1 families
};

/// Exhaustive search of normalized E^2 over a box; a brute-force reference
/// for lm_fit. resolution is the number of grid nodes per axis (>= 10).
CurveModel grid_oracle(CurveFamily family, std::span<const Point2> points, const GridBounds& bounds,
                       int resolution);

/// Fits every family and picks the one whose fitted curve lies closest to the
/// points (mean squared distance over the squared data scale).
struct ResidualRanking {
  std::array<FitResult, 9> fits;
  std::array<double, 9> score{};  // indexed by label; lower is better
  CurveFamily best = CurveFamily::CircleEllipse;
};
ResidualRanking classify_by_residual(std::span<const Point2> points, const FitOptions& opts = {});

}  // namespace looptrack
