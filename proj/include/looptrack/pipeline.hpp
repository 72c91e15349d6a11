#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "looptrack/classifier.hpp"
#include "looptrack/ekf.hpp"
#include "looptrack/fitter.hpp"
#include "looptrack/plane3d.hpp"

namespace looptrack {

struct TrajectorySample {
  double t = 0.0;
  Point3 pos = Point3::Zero();
};

/// Motion parameters of the simulated target.
struct SimulationSpec {
  double speed = 1.0;  // m/s
  double rate = 20.0;  // Hz
  int loops = 1;
  double start_parameter = 0.0;  // curve parameter of the first sample
};

/// Everything needed to regenerate the noiseless trajectory.
struct GroundTruth {
  CurveModel model;
  PlaneFrame frame;
  SimulationSpec sim;
};

struct TrajectoryRecord {
  std::vector<TrajectorySample> samples;
  std::optional<GroundTruth> truth;
  double noise_std = 0.0;  // NaN when unknown
  std::optional<std::uint64_t> noise_seed;
};

/// Samples the posed curve at constant ground speed (arc-length table), lifts
/// it into 3D with `frame` and timestamps samples at k / rate. The step is
/// adjusted so a whole number of samples covers each loop; the last sample
/// closes the final loop exactly on the first.
TrajectoryRecord simulate_target(const CurveModel& model, const PlaneFrame& frame,
                                 const SimulationSpec& sim);

/// i.i.d. zero-mean Gaussian perturbation with standard deviation sigma per axis.
TrajectoryRecord add_noise(const TrajectoryRecord& tr, double sigma, std::uint64_t seed);

enum class PointSource { Auto, Raw, Filtered };

struct PipelineConfig {
  /// Auto filters when the record's noise level is unknown or positive.
  PointSource source = PointSource::Auto;
  FilterConfig filter;
  FitOptions fit;
  /// Below this network confidence the residual-based classifier decides.
  double min_confidence = 0.6;
  std::optional<double> closure_radius;  // default max(3 noise_std, 0.02 a_est)
  double min_path_factor = 4.0;          // min path length = factor * a_est
  double prediction_loops = 1.0;
};

/// Index of the sample that closes the first loop (the loop is samples
/// [0, index)). Throws IncompleteLoop when the target never returns.
std::size_t detect_loop_closure(std::span<const Point2> points, double closure_radius,
                                double min_path_length);

/// Noise level of a densely sampled smooth path, from its second differences.
double estimate_noise(std::span<const Point2> points);

/// detect_loop_closure with the scale-relative thresholds of `cfg`; a NaN
/// noise_std is estimated from the points.
std::size_t find_first_loop(std::span<const Point2> points, double noise_std, const PipelineConfig& cfg);

struct StageTimings {
  double plane_ms = 0.0;
  double tracking_ms = 0.0;
  double classify_ms = 0.0;
  double fit_ms = 0.0;
  double predict_ms = 0.0;
};

struct PipelineReport {
  PlaneFrame plane;
  std::size_t loop_end = 0;  // closing sample index
  PointSource source = PointSource::Raw;
  std::vector<double> loop_times;
  std::vector<Point2> loop_raw;     // aligned measurements of the first loop
  std::vector<Point2> loop_points;  // the points that were classified and fitted
  std::size_t settle_samples = 0;   // leading filtered samples still converging
  ClassProbabilities class_probs{};
  CurveFamily network_family = CurveFamily::CircleEllipse;
  CurveFamily family = CurveFamily::CircleEllipse;
  bool used_fallback = false;
  std::optional<std::array<double, kFamilyCount>> fallback_scores;
  FitResult fit;
  std::vector<TrajectorySample> predicted_track;
  StageTimings timings;
};

/// Plane alignment, optional filtering, classification, curve fit and
/// long-horizon track prediction over the first loop of the record.
PipelineReport run_pipeline(const TrajectoryRecord& tr, const NetworkModel& net,
                            const PipelineConfig& cfg = {});

/// Long-horizon prediction: continues along the fitted curve from the loop's
/// last sample for cfg.prediction_loops loops.
std::vector<TrajectorySample> predict_track(const CurveModel& model, const PlaneFrame& frame,
                                            std::span<const Point2> loop,
                                            std::span<const double> times, double loops);

struct Metrics {
  bool family_correct = false;
  double a_rel_error = 0.0;
  std::optional<double> b_rel_error;
  double center_error = 0.0;  // m, measured in 3D
  double theta_error = 0.0;   // rad, modulo the fitted family's symmetry
  double mean_track_distance = 0.0;  // predicted track to the true curve, m
  double max_track_distance = 0.0;
  std::optional<double> raw_rmse;       // loop measurements vs truth, in-plane
  std::optional<double> filtered_rmse;  // filtered loop vs truth
};

/// Compares a report against the record's ground truth.
Metrics evaluate(const PipelineReport& report, const TrajectoryRecord& tr);

/// Distance from p to the closed polyline through `curve`.
double distance_to_polyline(const Point3& p, std::span<const Point3> curve);

}  // namespace looptrack
