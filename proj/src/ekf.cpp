#include "looptrack/ekf.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/LU>

#include "looptrack/error.hpp"

namespace looptrack {

namespace {

Point2 perp(const Point2& v) { return {-v.y(), v.x()}; }

void symmetrize(Eigen::Matrix2d& m) { m = 0.5 * (m + m.transpose()).eval(); }

}  // namespace

double EvolutionMatrix::angle() const { return std::atan2(s, c); }

Eigen::Matrix2d EvolutionMatrix::rotation() const {
  Eigen::Matrix2d r;
  r << c, -s, s, c;
  return r;
}

Point2 EvolutionMatrix::apply(const Point2& v) const {
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

EvolutionMatrix evolution_from_displacements(std::span<const Point2> displacements,
                                             double eps_disp) {
  require(displacements.size() >= 2, ErrorKind::Precondition,
          "evolution estimate needs at least 2 displacements");
  bool moving = false;
  for (const auto& d : displacements) moving = moving || d.norm() >= eps_disp;
  require(moving, ErrorKind::DegenerateMotion, "target is stationary over the window");

  // Each pair contributes [d_j] = [[e, -n], [n, e]]_(j-1) [c; s]; the normal
  // matrix of the stacked system is sum |d_(j-1)|^2 * I.
  double gram = 0.0;
  Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
  for (std::size_t j = 1; j < displacements.size(); ++j) {
    const Point2& prev = displacements[j - 1];
    const Point2& cur = displacements[j];
    gram += prev.squaredNorm();
    rhs.x() += prev.x() * cur.x() + prev.y() * cur.y();
    rhs.y() += prev.x() * cur.y() - prev.y() * cur.x();
  }
  require(gram > 0.0, ErrorKind::DegenerateMotion, "target is stationary over the window");
  const Eigen::Vector2d cs = rhs / gram;
  const double norm = cs.norm();
  require(norm > 0.0 && std::isfinite(norm), ErrorKind::DegenerateMotion,
          "evolution estimate vanished");
  return {cs.x() / norm, cs.y() / norm};
}

EvolutionMatrix estimate_evolution(std::span<const Point2> window, double eps_disp) {
  require(window.size() >= 4, ErrorKind::Precondition,
          "evolution window needs at least 4 points, got " + std::to_string(window.size()));
  std::vector<Point2> disp;
  disp.reserve(window.size() - 1);
  for (std::size_t i = 1; i < window.size(); ++i) disp.push_back(window[i] - window[i - 1]);
  return evolution_from_displacements(disp, eps_disp);
}

Point2 estimate_center(std::span<const Point2> window, const EvolutionMatrix& ev,
                       double eps_delta) {
  require(window.size() >= 2, ErrorKind::Precondition, "center estimate needs 2 points");
  const double delta = ev.angle();
  require(std::fabs(delta) >= eps_delta, ErrorKind::StraightLine,
          "curvature below threshold; motion is straight");
  const Point2& last = window.back();
  const Point2 disp = last - window[window.size() - 2];
  const Point2 next = ev.apply(disp);
  const Point2 tangent = 0.5 * (disp + next);
  return last + perp(tangent) / std::sin(delta);
}

Eigen::Vector2d process_model(const Eigen::Vector2d& x, const FilterInput& u) {
  const Eigen::Vector2d d = x - u.center;
  const double rho = d.norm();
  require(rho > 0.0, ErrorKind::Singularity, "state coincides with center of curvature");
  return (u.direction * u.speed / rho) * Eigen::Vector2d(-d.y(), d.x());
}

Eigen::Matrix2d process_jacobian(const Eigen::Vector2d& x, const FilterInput& u) {
  const double de = x.x() - u.center.x();
  const double dn = x.y() - u.center.y();
  const double rho2 = de * de + dn * dn;
  require(rho2 > 0.0, ErrorKind::Singularity, "state coincides with center of curvature");
  const double k = u.direction * u.speed / (rho2 * std::sqrt(rho2));
  Eigen::Matrix2d a;
  a << dn * de, -de * de,
       dn * dn, -de * dn;
  return k * a;
}

FilterState predict_step(const FilterState& fs, const FilterInput& u, double dt,
                         double max_substep_dt, double eps_center) {
  require(dt > 0.0 && std::isfinite(dt), ErrorKind::Precondition, "predict step needs dt > 0");
  require(max_substep_dt > 0.0, ErrorKind::Configuration, "max_substep_dt must be positive");
  const int steps = std::max(1, static_cast<int>(std::ceil(dt / max_substep_dt - 1e-12)));
  const double h = dt / steps;
  FilterState out = fs;
  for (int i = 0; i < steps; ++i) {
    require((out.x - u.center).norm() >= eps_center, ErrorKind::Singularity,
            "state coincides with center of curvature");
    // A is nilpotent, so I + hA is the exact transition over a sub-step and
    // keeps P positive definite where the plain Euler update would not.
    const Eigen::Matrix2d phi = Eigen::Matrix2d::Identity() + h * process_jacobian(out.x, u);
    out.x += h * process_model(out.x, u);
    out.P = phi * out.P * phi.transpose() + h * out.Q;
    symmetrize(out.P);
  }
  return out;
}

FilterState correct_step(const FilterState& fs, const Observation& z) {
  require(all_finite(z.pos), ErrorKind::InvalidInput, "non-finite measurement");
  const Eigen::Matrix2d s = fs.R + fs.P;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(s);
  require(lu.isInvertible(), ErrorKind::NumericalFailure, "innovation covariance is singular");
  const Eigen::Matrix2d gain = fs.P * lu.inverse();
  FilterState out = fs;
  out.x = fs.x + gain * (z.pos - fs.x);
  out.P = (Eigen::Matrix2d::Identity() - gain) * fs.P;
  symmetrize(out.P);
  return out;
}

Tracker::Tracker(FilterConfig cfg) : cfg_(cfg) {
  require(cfg_.window_len >= 4, ErrorKind::Configuration, "window_len must be at least 4");
  require(cfg_.q_std >= 0.0 && cfg_.r_std >= 0.0, ErrorKind::Configuration,
          "noise standard deviations must be non-negative");
  fs_.Q = cfg_.q_std * cfg_.q_std * Eigen::Matrix2d::Identity();
  fs_.R = cfg_.r_std * cfg_.r_std * Eigen::Matrix2d::Identity();
}

TrackSample Tracker::update(const Observation& z) {
  require(all_finite(z.pos) && std::isfinite(z.t), ErrorKind::InvalidInput,
          "non-finite observation");
  TrackSample out;
  out.t = z.t;
  out.measured = z.pos;

  if (!started_ || history_.size() < cfg_.window_len) {
    if (started_) {
      require(z.t > history_.back().t, ErrorKind::Precondition,
              "timestamps must be strictly increasing");
    }
    started_ = true;
    fs_.x = z.pos;
    fs_.P = fs_.R;
    history_.push_back(z);
    out.filtered = fs_.x;
    out.P = fs_.P;
    out.mode = TrackMode::Warmup;
    return out;
  }

  const double dt = z.t - history_.back().t;
  require(dt > 0.0, ErrorKind::Precondition, "timestamps must be strictly increasing");

  std::vector<Point2> window;
  window.reserve(history_.size());
  for (const auto& h : history_) window.push_back(h.pos);
  // chord over the window; a mean of per-step norms is inflated by noise
  const double speed =
      (history_.back().pos - history_.front().pos).norm() / (history_.back().t - history_.front().t);

  out.mode = TrackMode::Curved;
  try {
    const EvolutionMatrix ev = estimate_evolution(window, cfg_.eps_disp);
    FilterInput u;
    u.speed = speed;
    u.center = estimate_center(window, ev, cfg_.eps_delta);
    u.direction = ev.angle() >= 0.0 ? 1 : -1;
    fs_ = predict_step(fs_, u, dt, cfg_.max_substep_dt, cfg_.eps_center);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::StraightLine && e.kind() != ErrorKind::Singularity &&
        e.kind() != ErrorKind::DegenerateMotion) {
      throw;
    }
    const Point2 last_disp = window.back() - window[window.size() - 2];
    if (e.kind() == ErrorKind::DegenerateMotion || last_disp.norm() < cfg_.eps_disp) {
      out.mode = TrackMode::Stationary;
    } else {
      out.mode = TrackMode::Straight;
      fs_.x += speed * dt * last_disp.normalized();
    }
    fs_.P += dt * fs_.Q;
  }

  fs_ = correct_step(fs_, z);
  history_.push_back({z.t, fs_.x});
  while (history_.size() > cfg_.window_len) history_.pop_front();

  out.filtered = fs_.x;
  out.P = fs_.P;
  return out;
}

std::vector<TrackSample> track(std::span<const Observation> stream, const FilterConfig& cfg) {
  require(!stream.empty() && stream.size() >= cfg.window_len, ErrorKind::Precondition,
          "track needs at least window_len observations");
  Tracker tracker(cfg);
  std::vector<TrackSample> out;
  out.reserve(stream.size());
  for (const auto& z : stream) out.push_back(tracker.update(z));
  return out;
}

double position_rmse(std::span<const Point2> estimate, std::span<const Point2> truth,
                     std::size_t skip) {
  require(estimate.size() == truth.size(), ErrorKind::InvalidInput,
          "rmse inputs differ in length");
  require(estimate.size() > skip, ErrorKind::Precondition, "nothing left to compare after skip");
  double acc = 0.0;
  for (std::size_t i = skip; i < estimate.size(); ++i) acc += (estimate[i] - truth[i]).squaredNorm();
  return std::sqrt(acc / static_cast<double>(estimate.size() - skip));
}

}  // namespace looptrack
