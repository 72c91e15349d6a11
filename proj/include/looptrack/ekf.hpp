#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "looptrack/geometry.hpp"

namespace looptrack {

/// Per-step rotation (cos delta, sin delta) of the target's displacement vector.
struct EvolutionMatrix {
  double c = 1.0;
  double s = 0.0;

  double angle() const;
  Eigen::Matrix2d rotation() const;
  Point2 apply(const Point2& v) const;
};

/// Least-squares fit of d[j] = Rot * d[j-1] over consecutive displacements,
/// normalized to unit norm. Needs at least 2 displacements; throws
/// DegenerateMotion when every displacement is shorter than eps_disp.
EvolutionMatrix evolution_from_displacements(std::span<const Point2> displacements,
                                             double eps_disp = 1e-9);

/// Evolution matrix of a window of consecutive positions (at least 4).
EvolutionMatrix estimate_evolution(std::span<const Point2> window, double eps_disp = 1e-9);

/// Instantaneous center of curvature at the newest point of the window.
///
/// The next displacement is predicted by rotating the last one through `ev`;
/// the tangent is the mean of the last and next displacements, which has
/// length r*sin(delta) on a circle, so the center is exact for circular data.
/// Throws StraightLine when |delta| < eps_delta.
Point2 estimate_center(std::span<const Point2> window, const EvolutionMatrix& ev,
                       double eps_delta = 1e-4);

/// EKF state: position (p_e, p_n) with its error covariance and the process
/// (per second) and measurement noise covariances.
struct FilterState {
  Eigen::Vector2d x = Eigen::Vector2d::Zero();
  Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d Q = Eigen::Matrix2d::Zero();
  Eigen::Matrix2d R = Eigen::Matrix2d::Zero();
};

/// Process-model input: speed and center of the instantaneous circle.
/// `direction` is +1 for counter-clockwise travel about the center, -1 for
/// clockwise.
struct FilterInput {
  double speed = 0.0;
  Point2 center = Point2::Zero();
  int direction = 1;
};

struct Observation {
  double t = 0.0;
  Point2 pos = Point2::Zero();
};

struct FilterConfig {
  std::size_t window_len = 10;
  double q_std = 0.15;  // m per sqrt(s)
  double r_std = 0.1;   // m
  double eps_delta = 1e-4;
  double eps_center = 1e-6;
  double eps_disp = 1e-9;
  double max_substep_dt = 0.05;
};

/// Tangential velocity of magnitude `speed` about the input's center.
Eigen::Vector2d process_model(const Eigen::Vector2d& x, const FilterInput& u);
/// d(process_model)/dx.
Eigen::Matrix2d process_jacobian(const Eigen::Vector2d& x, const FilterInput& u);

/// Euler-integrates the state and the covariance ODE P' = AP + PA^T + Q over
/// dt, splitting into sub-steps no longer than max_substep_dt.
FilterState predict_step(const FilterState& fs, const FilterInput& u, double dt,
                         double max_substep_dt = 0.05, double eps_center = 1e-6);

/// Discrete correction with identity measurement model.
FilterState correct_step(const FilterState& fs, const Observation& z);

enum class TrackMode {
  Warmup,    // history still filling; state is the raw measurement
  Curved,    // circular-arc process model
  Straight,  // curvature degenerate; constant-velocity fallback
  Stationary,
};

struct TrackSample {
  double t = 0.0;
  Point2 measured = Point2::Zero();
  Point2 filtered = Point2::Zero();
  Eigen::Matrix2d P = Eigen::Matrix2d::Zero();
  TrackMode mode = TrackMode::Warmup;
};

/// Sequential filter: feed observations in time order.
class Tracker {
 public:
  explicit Tracker(FilterConfig cfg);

  TrackSample update(const Observation& z);

  const FilterConfig& config() const { return cfg_; }
  const FilterState& state() const { return fs_; }

 private:
  FilterConfig cfg_;
  FilterState fs_;
  std::deque<Observation> history_;  // filtered positions with timestamps
  bool started_ = false;
};

/// Runs a Tracker over a whole stream. Requires at least window_len
/// observations with strictly increasing timestamps.
std::vector<TrackSample> track(std::span<const Observation> stream, const FilterConfig& cfg);

/// Root-mean-square planar distance between paired positions, skipping the first `skip`.
double position_rmse(std::span<const Point2> estimate, std::span<const Point2> truth,
                     std::size_t skip = 0);

}  // namespace looptrack
