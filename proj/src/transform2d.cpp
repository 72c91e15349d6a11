#include "looptrack/transform2d.hpp"

#include <cmath>

#include "looptrack/error.hpp"

namespace looptrack {

void validate(const CurveModel& model) {
  validate(model.family, model.params);
  require(std::isfinite(model.pose.theta) && std::isfinite(model.pose.x0) &&
              std::isfinite(model.pose.y0),
          ErrorKind::InvalidInput, "curve pose must be finite");
}

std::vector<Point2> rotate_points(std::span<const Point2> points, double theta) {
  require(std::isfinite(theta), ErrorKind::InvalidInput, "rotation angle must be finite");
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(rotate(p, theta));
  return out;
}

Point2 to_canonical(const Pose2& pose, const Point2& p) {
  return rotate(Point2(p.x() - pose.x0, p.y() - pose.y0), -pose.theta);
}

Point2 from_canonical(const Pose2& pose, const Point2& q) {
  return rotate(q, pose.theta) + Point2(pose.x0, pose.y0);
}

double model_residual(const CurveModel& model, const Point2& p) {
  require(all_finite(p), ErrorKind::InvalidInput, "non-finite point coordinates");
  return implicit_value(model.family, model.params, to_canonical(model.pose, p));
}

std::vector<double> residual_vector(const CurveModel& model, std::span<const Point2> points) {
  require(!points.empty(), ErrorKind::InvalidInput, "residual_vector needs at least one point");
  std::vector<double> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(model_residual(model, p));
  return out;
}

double sum_squares(const CurveModel& model, std::span<const Point2> points) {
  double acc = 0.0;
  for (double r : residual_vector(model, points)) acc += r * r;
  return acc;
}

CurveModel canonicalize(CurveModel model) {
  if (model.family == CurveFamily::CircleEllipse && model.params.b && *model.params.b > model.params.a) {
    std::swap(model.params.a, *model.params.b);
    model.pose.theta += kPi / 2.0;
  }
  const double period = symmetry_period(model.family);
  model.pose.theta = wrap_angle(model.pose.theta, period, -period / 2.0);
  return model;
}

double theta_distance(CurveFamily family, double theta_a, double theta_b) {
  return angle_distance(theta_a, theta_b, symmetry_period(family));
}

std::vector<Point2> sample_model(const CurveModel& model, std::size_t n, double t0) {
  auto pts = sample_arclength(model.family, model.params, n, t0);
  for (auto& p : pts) p = from_canonical(model.pose, p);
  return pts;
}

}  // namespace looptrack
