#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace looptrack {

/// Positions in meters. Planar work happens in the (east, north) / (x, y) plane.
using Point2 = Eigen::Vector2d;
using Point3 = Eigen::Vector3d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into [lo, lo + period).
inline double wrap_angle(double angle, double period, double lo) {
  double r = std::fmod(angle - lo, period);
  if (r < 0.0) r += period;
  // fmod can return exactly `period` after the adjustment for tiny negatives
  if (r >= period) r -= period;
  return lo + r;
}

/// Wraps into [-pi, pi).
inline double wrap_pi(double angle) { return wrap_angle(angle, kTwoPi, -kPi); }

/// Smallest absolute difference between two angles modulo `period`.
inline double angle_distance(double a, double b, double period) {
  double d = std::fabs(wrap_angle(a - b, period, -period / 2.0));
  return d;
}

inline bool all_finite(const Point2& p) { return std::isfinite(p.x()) && std::isfinite(p.y()); }
inline bool all_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

inline Point2 rotate(const Point2& p, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * p.x() - s * p.y(), s * p.x() + c * p.y()};
}

inline Point2 centroid(std::span<const Point2> pts) {
  Point2 c = Point2::Zero();
  for (const auto& p : pts) c += p;
  return pts.empty() ? c : Point2(c / static_cast<double>(pts.size()));
}

/// Root-mean-square distance from the centroid.
inline double rms_radius(std::span<const Point2> pts) {
  if (pts.empty()) return 0.0;
  const Point2 c = centroid(pts);
  double acc = 0.0;
  for (const auto& p : pts) acc += (p - c).squaredNorm();
  return std::sqrt(acc / static_cast<double>(pts.size()));
}

}  // namespace looptrack
