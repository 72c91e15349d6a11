#pragma once

#include <span>
#include <vector>

#include "looptrack/ekf.hpp"

namespace looptrack {

struct TimedPoint {
  double t = 0.0;
  Point2 pos = Point2::Zero();
};

/// Result of the observation phase.
struct ObservationSummary {
  EvolutionMatrix evolution;
  Point2 last_displacement = Point2::Zero();  // rescaled to the mean interval
  double mean_speed = 0.0;                    // m/s
  double mean_dt = 0.0;                       // s
};

/// Displacements are divided by their time intervals before the least-squares
/// fit, so uneven sampling does not skew the rotation estimate.
/// Needs at least 4 states with increasing t.
ObservationSummary observe_phase(std::span<const TimedPoint> states, double eps_disp = 1e-9);

struct PredictionHorizon {
  TimedPoint anchor;
  double dt = 0.0;
  std::vector<TimedPoint> waypoints;
};

/// Propagates the evolution matrix m steps ahead of the anchor:
/// d_1 = Rot * last_disp, d_(j+1) = Rot * d_j, waypoint_j = anchor + sum d_i.
PredictionHorizon predict_horizon(const TimedPoint& anchor, const EvolutionMatrix& ev,
                                  const Point2& last_disp, std::size_t m, double dt);

/// Straight-line constant-velocity extrapolation, the baseline for predict_horizon.
PredictionHorizon dead_reckoning(const TimedPoint& anchor, const Point2& last_disp,
                                 std::size_t m, double dt);

}  // namespace looptrack
