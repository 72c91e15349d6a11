#include "looptrack/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Geometry>

#include "looptrack/error.hpp"

namespace looptrack {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Parameter of the canonical curve point nearest to q.
double nearest_parameter(const CurveModel& model, const Point2& q) {
  constexpr int kCoarse = 4096;
  double best_t = 0.0, best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kCoarse; ++i) {
    const double t = kTwoPi * i / kCoarse;
    const double d = (point_at(model.family, model.params, t) - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best_t = t;
    }
  }
  double lo = best_t - kTwoPi / kCoarse, hi = best_t + kTwoPi / kCoarse;
  for (int it = 0; it < 60; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    const double d1 = (point_at(model.family, model.params, m1) - q).squaredNorm();
    const double d2 = (point_at(model.family, model.params, m2) - q).squaredNorm();
    if (d1 < d2) hi = m2; else lo = m1;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

// For white noise E|p[i+1] - 2p[i] + p[i-1]|^2 = 12 sigma^2 over two axes. Curvature
// inflates it slightly, which only widens the closure radius.
double estimate_noise(std::span<const Point2> pts) {
  if (pts.size() < 3) return 0.0;
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
    acc += (pts[i + 1] - 2.0 * pts[i] + pts[i - 1]).squaredNorm();
  }
  return std::sqrt(acc / static_cast<double>(pts.size() - 2) / 12.0);
}

std::size_t find_first_loop(std::span<const Point2> points, double noise_std, const PipelineConfig& cfg) {
  const double a_est = rms_radius(points);
  const double noise = std::isnan(noise_std) ? estimate_noise(points) : noise_std;
  const double radius = cfg.closure_radius.value_or(std::max(3.0 * noise, 0.02 * a_est));
  return detect_loop_closure(points, radius, cfg.min_path_factor * a_est);
}

TrajectoryRecord simulate_target(const CurveModel& model, const PlaneFrame& frame,
                                 const SimulationSpec& sim) {
  try {
    validate(model);
  } catch (const Error& e) {
    fail(ErrorKind::Configuration, std::string("invalid target model: ") + e.what());
  }
  require(sim.speed > 0.0 && std::isfinite(sim.speed), ErrorKind::Configuration, "speed must be positive");
  require(sim.rate > 0.0 && std::isfinite(sim.rate), ErrorKind::Configuration, "rate must be positive");
  require(sim.loops >= 1, ErrorKind::Configuration, "loops must be at least 1");
  require(all_finite(frame.normal) && std::fabs(frame.normal.norm() - 1.0) < 1e-9 &&
              all_finite(frame.centroid),
          ErrorKind::Configuration, "invalid plane frame");

  const ArcLengthTable table(model.family, model.params);
  const double perimeter = table.perimeter();
  const auto per_loop = std::max<long long>(8, std::llround(perimeter * sim.rate / sim.speed));
  const double step = perimeter / static_cast<double>(per_loop);
  const double s0 = table.arclength_at(sim.start_parameter);
  const long long count = per_loop * sim.loops + 1;

  TrajectoryRecord tr;
  tr.noise_std = 0.0;
  tr.truth = GroundTruth{model, frame, sim};
  tr.samples.reserve(static_cast<std::size_t>(count));
  for (long long k = 0; k < count; ++k) {
    const double s = s0 + step * static_cast<double>(k % per_loop);
    const Point2 q = point_at(model.family, model.params, table.parameter_at(s));
    tr.samples.push_back({static_cast<double>(k) / sim.rate, lift_to_3d(from_canonical(model.pose, q), frame)});
  }
  return tr;
}

TrajectoryRecord add_noise(const TrajectoryRecord& tr, double sigma, std::uint64_t seed) {
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::InvalidInput, "noise sigma must be >= 0");
  TrajectoryRecord out = tr;
  out.noise_std = sigma;
  out.noise_seed = seed;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& s : out.samples) {
    s.pos.x() += noise(rng);
    s.pos.y() += noise(rng);
    s.pos.z() += noise(rng);
  }
  return out;
}

std::size_t detect_loop_closure(std::span<const Point2> points, double closure_radius,
                                double min_path_length) {
  constexpr std::size_t kDirLag = 5;
  require(closure_radius > 0.0, ErrorKind::InvalidInput, "closure radius must be positive");
  if (points.size() <= 2 * kDirLag) fail(ErrorKind::IncompleteLoop, "too few samples for a loop");
  const Point2& start = points.front();
  const Point2 start_dir = points[kDirLag] - start;

  double path = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    path += (points[i] - points[i - 1]).norm();
    if (i <= kDirLag || path < min_path_length) continue;
    if ((points[i] - start).norm() > closure_radius) continue;
    std::size_t j = i;
    while (j + 1 < points.size() && (points[j + 1] - start).norm() < (points[j] - start).norm()) ++j;
    // The departure after a true closure retraces the start. A figure-eight node or
    // a quadrifolium center is passed again half way round, leaving another way.
    // Arrival direction is no help: at a cusp it is opposite to the departure.
    if (j + kDirLag >= points.size()) return j;  // data ends here
    const Point2 dir = points[j + kDirLag] - points[j];
    if (dir.dot(start_dir) > 0.5 * dir.norm() * start_dir.norm()) return j;
    for (; i < j; ++i) path += (points[i + 1] - points[i]).norm();
  }
  fail(ErrorKind::IncompleteLoop, "trajectory never returns to its start point");
}

std::vector<TrajectorySample> predict_track(const CurveModel& model, const PlaneFrame& frame,
                                            std::span<const Point2> loop,
                                            std::span<const double> times, double loops) {
  require(loop.size() >= 8 && loop.size() == times.size(), ErrorKind::InvalidInput,
          "track prediction needs a timed loop of at least 8 points");
  require(loops > 0.0, ErrorKind::InvalidInput, "prediction length must be positive");
  const std::size_t n = loop.size();
  const double dt = (times.back() - times.front()) / static_cast<double>(n - 1);
  require(dt > 0.0, ErrorKind::InvalidInput, "loop timestamps must increase");

  const ArcLengthTable table(model.family, model.params);
  const double perimeter = table.perimeter();
  const double t_anchor = nearest_parameter(model, to_canonical(model.pose, loop.back()));
  const double s_anchor = table.arclength_at(t_anchor);

  // travel direction along the parametrization, from the recent motion
  const std::size_t lag = std::min<std::size_t>(5, n - 1);
  const Point2 motion = loop.back() - loop[n - 1 - lag];
  const double h = 1e-4;
  const Point2 tangent = from_canonical(model.pose, point_at(model.family, model.params, t_anchor + h)) -
                         from_canonical(model.pose, point_at(model.family, model.params, t_anchor - h));
  const double sign = motion.dot(tangent) >= 0.0 ? 1.0 : -1.0;

  const double ds = perimeter / static_cast<double>(n);  // one loop took n intervals
  const auto count = std::max<long long>(1, std::llround(loops * static_cast<double>(n)));
  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long long k = 1; k <= count; ++k) {
    const double s = s_anchor + sign * ds * static_cast<double>(k);
    const Point2 q = point_at(model.family, model.params, table.parameter_at(s));
    out.push_back({times.back() + dt * static_cast<double>(k), lift_to_3d(from_canonical(model.pose, q), frame)});
  }
  return out;
}

PipelineReport run_pipeline(const TrajectoryRecord& tr, const NetworkModel& net,
                            const PipelineConfig& cfg) {
  require(tr.samples.size() >= 8, ErrorKind::Precondition, "trajectory too short for a loop");
  for (std::size_t i = 1; i < tr.samples.size(); ++i) {
    require(tr.samples[i].t > tr.samples[i - 1].t, ErrorKind::InvalidInput,
            "trajectory timestamps must be strictly increasing");
  }
  PipelineReport report;

  auto t0 = Clock::now();
  std::vector<Point3> pts3;
  pts3.reserve(tr.samples.size());
  for (const auto& s : tr.samples) pts3.push_back(s.pos);
  report.plane = fit_plane(pts3);
  const std::vector<Point2> aligned = align_to_xy(pts3, report.plane);
  report.timings.plane_ms = elapsed_ms(t0);

  report.loop_end = find_first_loop(aligned, tr.noise_std, cfg);
  const std::size_t n = report.loop_end;
  report.loop_raw.assign(aligned.begin(), aligned.begin() + static_cast<std::ptrdiff_t>(n));
  report.loop_times.reserve(n);
  for (std::size_t i = 0; i < n; ++i) report.loop_times.push_back(tr.samples[i].t);

  report.source = cfg.source;
  if (report.source == PointSource::Auto) {
    report.source = (std::isnan(tr.noise_std) || tr.noise_std > 0.0) ? PointSource::Filtered : PointSource::Raw;
  }
  t0 = Clock::now();
  if (report.source == PointSource::Filtered) {
    std::vector<Observation> obs;
    obs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) obs.push_back({report.loop_times[i], report.loop_raw[i]});
    const auto tracked = track(obs, cfg.filter);
    report.loop_points.reserve(n);
    for (const auto& s : tracked) report.loop_points.push_back(s.filtered);
    report.settle_samples = std::min(n, 2 * cfg.filter.window_len);
  } else {
    report.loop_points = report.loop_raw;
  }
  report.timings.tracking_ms = elapsed_ms(t0);

  t0 = Clock::now();
  report.class_probs = classify(net, preprocess(report.loop_points, net.m));
  report.network_family = argmax_family(report.class_probs);
  report.family = report.network_family;
  const double confidence = *std::max_element(report.class_probs.begin(), report.class_probs.end());
  report.timings.classify_ms = elapsed_ms(t0);

  t0 = Clock::now();
  if (confidence < cfg.min_confidence) {
    ResidualRanking ranking = classify_by_residual(report.loop_points, cfg.fit);
    report.used_fallback = true;
    report.family = ranking.best;
    report.fallback_scores = ranking.score;
    report.fit = std::move(ranking.fits[static_cast<std::size_t>(family_label(ranking.best))]);
  } else {
    report.fit = fit_curve(report.family, report.loop_points, cfg.fit);
  }
  report.timings.fit_ms = elapsed_ms(t0);

  t0 = Clock::now();
  report.predicted_track =
      predict_track(report.fit.model, report.plane, report.loop_points, report.loop_times, cfg.prediction_loops);
  report.timings.predict_ms = elapsed_ms(t0);
  return report;
}

double distance_to_polyline(const Point3& p, std::span<const Point3> curve) {
  require(curve.size() >= 2, ErrorKind::InvalidInput, "polyline needs at least 2 points");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const Point3& a = curve[i];
    const Point3& b = curve[(i + 1) % curve.size()];
    const Point3 ab = b - a;
    const double len2 = ab.squaredNorm();
    const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    best = std::min(best, (a + u * ab - p).squaredNorm());
  }
  return std::sqrt(best);
}

Metrics evaluate(const PipelineReport& report, const TrajectoryRecord& tr) {
  require(tr.truth.has_value(), ErrorKind::InvalidInput, "evaluation needs ground truth");
  const GroundTruth& gt = *tr.truth;
  const CurveModel truth = canonicalize(gt.model);
  const CurveModel& fitted = report.fit.model;

  Metrics m;
  m.family_correct = fitted.family == truth.family;
  m.a_rel_error = std::fabs(fitted.params.a - truth.params.a) / truth.params.a;
  if (fitted.params.b && truth.params.b) {
    m.b_rel_error = std::fabs(*fitted.params.b - *truth.params.b) / *truth.params.b;
  }
  const Point3 c_fit = lift_to_3d(Point2(fitted.pose.x0, fitted.pose.y0), report.plane);
  const Point3 c_true = lift_to_3d(Point2(truth.pose.x0, truth.pose.y0), gt.frame);
  m.center_error = (c_fit - c_true).norm();

  const Point3 axis_fit =
      report.plane.rotation().transpose() * Point3(std::cos(fitted.pose.theta), std::sin(fitted.pose.theta), 0.0);
  const Point3 axis_true =
      gt.frame.rotation().transpose() * Point3(std::cos(truth.pose.theta), std::sin(truth.pose.theta), 0.0);
  const double relative = std::atan2(axis_true.cross(axis_fit).dot(report.plane.normal), axis_true.dot(axis_fit));
  m.theta_error = theta_distance(fitted.family, relative, 0.0);

  const auto curve2 = sample_model(gt.model, 8192);
  const auto curve3 = lift_to_3d(curve2, gt.frame);
  if (!report.predicted_track.empty()) {
    double sum = 0.0;
    for (const auto& s : report.predicted_track) {
      const double d = distance_to_polyline(s.pos, curve3);
      sum += d;
      m.max_track_distance = std::max(m.max_track_distance, d);
    }
    m.mean_track_distance = sum / static_cast<double>(report.predicted_track.size());
  }

  // in-plane tracking error against the noiseless trajectory
  const std::size_t n = report.loop_raw.size();
  if (n > report.settle_samples) {
    const TrajectoryRecord clean = simulate_target(gt.model, gt.frame, gt.sim);
    if (clean.samples.size() >= n) {
      std::vector<Point2> truth2;
      truth2.reserve(n);
      const Eigen::Matrix3d rot = report.plane.rotation();
      for (std::size_t i = 0; i < n; ++i) {
        const Point3 q = rot * (clean.samples[i].pos - report.plane.centroid);
        truth2.emplace_back(q.x(), q.y());
      }
      m.raw_rmse = position_rmse(report.loop_raw, truth2, report.settle_samples);
      if (report.source == PointSource::Filtered) {
        m.filtered_rmse = position_rmse(report.loop_points, truth2, report.settle_samples);
      }
    }
  }
  return m;
}

}  // namespace looptrack
