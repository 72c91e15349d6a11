#pragma once

#include <span>
#include <vector>

#include "looptrack/curves.hpp"

namespace looptrack {

/// In-plane pose of a curve: counter-clockwise rotation theta then offset (x0, y0).
struct Pose2 {
  double theta = 0.0;
  double x0 = 0.0;
  double y0 = 0.0;
};

/// A classified-and-fitted closed curve: family, shape parameters and pose.
struct CurveModel {
  CurveFamily family = CurveFamily::CircleEllipse;
  CanonicalParams params;
  Pose2 pose;
};

/// Throws InvalidInput unless params match the family and the pose is finite.
void validate(const CurveModel& model);

std::vector<Point2> rotate_points(std::span<const Point2> points, double theta);

/// Maps a world point into the model's canonical frame: translate by
/// (-x0, -y0), then rotate by -theta.
Point2 to_canonical(const Pose2& pose, const Point2& p);
/// Inverse of to_canonical.
Point2 from_canonical(const Pose2& pose, const Point2& q);

/// g(x, y; theta, a, b, x0, y0): the canonical implicit value at to_canonical(p).
double model_residual(const CurveModel& model, const Point2& p);

/// model_residual for each point. The sum of squares is the E^2 objective.
std::vector<double> residual_vector(const CurveModel& model, std::span<const Point2> points);

/// Sum of squared residuals.
double sum_squares(const CurveModel& model, std::span<const Point2> points);

/// Brings a model to its unique representative: ellipses get a >= b (swapping
/// axes rotates by pi/2), and theta is wrapped to [-T/2, T/2) with T the
/// family's symmetry period.
CurveModel canonicalize(CurveModel model);

/// Difference between two orientations modulo the family's symmetry period.
double theta_distance(CurveFamily family, double theta_a, double theta_b);

/// Points on the posed curve at uniform arc length, starting at parameter t0.
std::vector<Point2> sample_model(const CurveModel& model, std::size_t n, double t0 = 0.0);

}  // namespace looptrack
