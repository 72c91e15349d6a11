#include "looptrack/predictor.hpp"

#include <cmath>
#include <string>

#include "looptrack/error.hpp"

namespace looptrack {

ObservationSummary observe_phase(std::span<const TimedPoint> states, double eps_disp) {
  require(states.size() >= 4, ErrorKind::Precondition,
          "observation phase needs at least 4 states, got " + std::to_string(states.size()));
  std::vector<Point2> velocity;
  velocity.reserve(states.size() - 1);
  double speed_sum = 0.0;
  for (std::size_t i = 1; i < states.size(); ++i) {
    const double dt = states[i].t - states[i - 1].t;
    require(dt > 0.0, ErrorKind::Precondition, "state timestamps must be increasing");
    const Point2 disp = states[i].pos - states[i - 1].pos;
    velocity.push_back(disp / dt);
    speed_sum += disp.norm() / dt;
  }
  ObservationSummary out;
  out.mean_dt = (states.back().t - states.front().t) / static_cast<double>(states.size() - 1);
  // eps_disp is a length; compare velocities against it over the mean interval
  out.evolution = evolution_from_displacements(velocity, eps_disp / out.mean_dt);
  out.mean_speed = speed_sum / static_cast<double>(velocity.size());
  out.last_displacement = velocity.back() * out.mean_dt;
  return out;
}

PredictionHorizon predict_horizon(const TimedPoint& anchor, const EvolutionMatrix& ev,
                                  const Point2& last_disp, std::size_t m, double dt) {
  require(m >= 1, ErrorKind::Precondition, "prediction horizon needs m >= 1");
  require(dt > 0.0, ErrorKind::Precondition, "prediction step needs dt > 0");
  require(last_disp.norm() > 0.0, ErrorKind::Precondition, "last displacement must be non-zero");
  PredictionHorizon out;
  out.anchor = anchor;
  out.dt = dt;
  out.waypoints.reserve(m);
  Point2 disp = last_disp;
  Point2 pos = anchor.pos;
  for (std::size_t j = 1; j <= m; ++j) {
    disp = ev.apply(disp);
    pos += disp;
    out.waypoints.push_back({anchor.t + static_cast<double>(j) * dt, pos});
  }
  return out;
}

PredictionHorizon dead_reckoning(const TimedPoint& anchor, const Point2& last_disp,
                                 std::size_t m, double dt) {
  return predict_horizon(anchor, EvolutionMatrix{1.0, 0.0}, last_disp, m, dt);
}

}  // namespace looptrack
