#include "looptrack/plane3d.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "looptrack/error.hpp"

namespace looptrack {

namespace {

// Orients the normal and derives the two rotation angles.
void set_angles(PlaneFrame& frame) {
  Point3 n = frame.normal.normalized();
  if (n.z() < 0.0) n = -n;
  frame.normal = n;
  const double horizontal = std::hypot(n.x(), n.y());
  if (horizontal <= 1e-14) {
    frame.gamma = 0.0;
    frame.alpha = 0.0;
    return;
  }
  frame.gamma = std::atan2(n.x(), -n.y());
  // same angle as acos(|n3| / |n|), better conditioned near 0
  frame.alpha = std::atan2(horizontal, std::fabs(n.z()));
}

}  // namespace

PlaneFrame PlaneFrame::from_normal(const Point3& normal, const Point3& origin) {
  require(all_finite(normal) && all_finite(origin) && normal.norm() > 0.0,
          ErrorKind::InvalidInput, "plane normal must be finite and non-zero");
  PlaneFrame frame;
  frame.normal = normal;
  frame.centroid = origin;
  set_angles(frame);
  return frame;
}

Eigen::Matrix3d PlaneFrame::rotation() const {
  const Eigen::Matrix3d rz = Eigen::AngleAxisd(-gamma, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Matrix3d rx = Eigen::AngleAxisd(-alpha, Eigen::Vector3d::UnitX()).toRotationMatrix();
  return rx * rz;
}

PlaneFrame fit_plane(std::span<const Point3> points) {
  require(points.size() >= 3, ErrorKind::DegenerateGeometry, "plane fit needs at least 3 points");
  Point3 c = Point3::Zero();
  for (const auto& p : points) {
    require(all_finite(p), ErrorKind::InvalidInput, "non-finite point coordinates");
    c += p;
  }
  c /= static_cast<double>(points.size());

  Eigen::MatrixX3d centered(static_cast<Eigen::Index>(points.size()), 3);
  for (std::size_t i = 0; i < points.size(); ++i) {
    centered.row(static_cast<Eigen::Index>(i)) = (points[i] - c).transpose();
  }
  Eigen::JacobiSVD<Eigen::MatrixX3d> svd(centered, Eigen::ComputeThinV);
  const Eigen::Vector3d sigma = svd.singularValues();
  require(sigma(0) > 0.0 && sigma(1) > 1e-12 * sigma(0), ErrorKind::DegenerateGeometry,
          "points are coincident or collinear");

  PlaneFrame frame;
  frame.centroid = c;
  frame.sigma = sigma;
  frame.normal = svd.matrixV().col(2);
  set_angles(frame);
  return frame;
}

std::vector<Point2> align_to_xy(std::span<const Point3> points, const PlaneFrame& frame) {
  const Eigen::Matrix3d rot = frame.rotation();
  const double limit = 10.0 * frame.sigma(2) + 1e-6;
  std::vector<Point2> out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const Point3 q = rot * (p - frame.centroid);
    require(std::fabs(q.z()) <= limit, ErrorKind::AlignmentFailure,
            "point lies off the fitted plane by " + std::to_string(q.z()) + " m");
    out.emplace_back(q.x(), q.y());
  }
  return out;
}

std::vector<Point2> align_to_xy(std::span<const Point3> points) {
  return align_to_xy(points, fit_plane(points));
}

Point3 lift_to_3d(const Point2& p, const PlaneFrame& frame) {
  return frame.centroid + frame.rotation().transpose() * Point3(p.x(), p.y(), 0.0);
}

std::vector<Point3> lift_to_3d(std::span<const Point2> points, const PlaneFrame& frame) {
  const Eigen::Matrix3d back = frame.rotation().transpose();
  std::vector<Point3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(frame.centroid + back * Point3(p.x(), p.y(), 0.0));
  return out;
}

}  // namespace looptrack
