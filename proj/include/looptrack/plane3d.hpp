#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "looptrack/geometry.hpp"

namespace looptrack {

/// Best-fit plane of a 3D loop plus the rigid map that carries it onto z = 0.
///
/// The map is p -> Rx(-alpha) * Rz(-gamma) * (p - centroid), where
/// gamma = atan2(n1, -n2) turns the plane's trace on z = 0 parallel to the x
/// axis and alpha = acos(|n3| / |n|) tilts the plane flat. The normal is
/// oriented so n3 >= 0; a horizontal plane gets gamma = alpha = 0.
struct PlaneFrame {
  Point3 normal = Point3::UnitZ();
  Point3 centroid = Point3::Zero();
  double gamma = 0.0;
  double alpha = 0.0;
  Eigen::Vector3d sigma = Eigen::Vector3d::Zero();  // descending singular values

  /// Frame for a known plane through `origin` (sigma left zero).
  static PlaneFrame from_normal(const Point3& normal, const Point3& origin);

  /// World -> plane rotation (applied after subtracting the centroid).
  Eigen::Matrix3d rotation() const;
};

PlaneFrame fit_plane(std::span<const Point3> points);

/// Rotates centered points into the X-Y plane and drops z.
/// Throws AlignmentFailure when the points do not lie on the frame's plane.
std::vector<Point2> align_to_xy(std::span<const Point3> points, const PlaneFrame& frame);

/// Fits the plane and aligns in one call.
std::vector<Point2> align_to_xy(std::span<const Point3> points);

/// Inverse of align_to_xy for points on the plane.
std::vector<Point3> lift_to_3d(std::span<const Point2> points, const PlaneFrame& frame);
Point3 lift_to_3d(const Point2& p, const PlaneFrame& frame);

}  // namespace looptrack
