#include "looptrack/ekf.hpp"

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <random>

#include "looptrack/error.hpp"

namespace looptrack {
namespace {

std::vector<Point2> circle_points(const Point2& c, double r, double step, int n, double phase = 0.3) {
  std::vector<Point2> pts;
  for (int i = 0; i < n; ++i) pts.push_back(c + r * Point2(std::cos(phase + step * i), std::sin(phase + step * i)));
  return pts;
}

std::vector<Point2> displacements(const std::vector<Point2>& pts) {
  std::vector<Point2> d;
  for (std::size_t i = 1; i < pts.size(); ++i) d.push_back(pts[i] - pts[i - 1]);
  return d;
}

TEST(Ekf, EvolutionRecoversStepAngle) {
  for (double step : {0.01, 0.2, -0.35, 1.0}) {
    const auto ev = estimate_evolution(circle_points({1.0, -2.0}, 3.0, step, 10));
    EXPECT_NEAR(ev.angle(), step, 1e-12);
    EXPECT_NEAR(ev.c * ev.c + ev.s * ev.s, 1.0, 1e-15);
  }
}

TEST(Ekf, EvolutionRotationMatchesApply) {
  const EvolutionMatrix ev{std::cos(0.4), std::sin(0.4)};
  const Point2 v(2.0, -1.0);
  EXPECT_LT((ev.apply(v) - ev.rotation() * v).norm(), 1e-15);
  EXPECT_LT((ev.apply(v) - rotate(v, 0.4)).norm(), 1e-15);
}

TEST(Ekf, EvolutionPreconditions) {
  const std::vector<Point2> one = {{1.0, 0.0}};
  EXPECT_THROW(evolution_from_displacements(one), Error);
  const std::vector<Point2> still(5, Point2(2.0, 2.0));
  try {
    estimate_evolution(still);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMotion);
  }
}

TEST(Ekf, CenterOfExactCircle) {
  const Point2 c(4.0, -1.5);
  for (double step : {0.05, -0.1, 0.3}) {
    const auto window = circle_points(c, 5.0, step, 10);
    const auto ev = estimate_evolution(window);
    EXPECT_LT((estimate_center(window, ev) - c).norm(), 1e-9) << step;
  }
}

TEST(Ekf, StraightMotionHasNoCenter) {
  std::vector<Point2> line;
  for (int i = 0; i < 10; ++i) line.emplace_back(0.1 * i, 0.05 * i);
  const auto ev = estimate_evolution(line);
  EXPECT_NEAR(ev.angle(), 0.0, 1e-12);
  try {
    estimate_center(line, ev);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::StraightLine);
  }
}

TEST(Ekf, ProcessModelIsTangentWithGivenSpeed) {
  const FilterInput u{2.0, {1.0, 1.0}, 1};
  const Eigen::Vector2d x(4.0, 5.0);
  const Eigen::Vector2d v = process_model(x, u);
  EXPECT_NEAR(v.norm(), 2.0, 1e-14);
  EXPECT_NEAR(v.dot(x - u.center), 0.0, 1e-12);
  // counter-clockwise for direction +1
  const Eigen::Vector2d d = x - u.center;
  EXPECT_GT(d.x() * v.y() - d.y() * v.x(), 0.0);
}

TEST(Ekf, JacobianMatchesCentralDifferences) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-10.0, 10.0), sp(0.1, 5.0);
  for (int i = 0; i < 100; ++i) {
    const FilterInput in{sp(rng), {u(rng), u(rng)}, i % 2 ? 1 : -1};
    Eigen::Vector2d x(u(rng), u(rng));
    if ((x - in.center).norm() < 0.5) x += Eigen::Vector2d(1.0, 1.0);
    const Eigen::Matrix2d j = process_jacobian(x, in);
    const double h = 1e-6;
    Eigen::Matrix2d fd;
    for (int k = 0; k < 2; ++k) {
      Eigen::Vector2d e = Eigen::Vector2d::Zero();
      e(k) = h;
      fd.col(k) = (process_model(x + e, in) - process_model(x - e, in)) / (2.0 * h);
    }
    EXPECT_LT((j - fd).cwiseAbs().maxCoeff(), 1e-5);
  }
}

TEST(Ekf, SingularAtCenter) {
  const FilterInput u{1.0, {2.0, 3.0}, 1};
  EXPECT_THROW(process_model(Eigen::Vector2d(2.0, 3.0), u), Error);
  EXPECT_THROW(process_jacobian(Eigen::Vector2d(2.0, 3.0), u), Error);
}

TEST(Ekf, PredictStaysOnCircleAndGrowsCovariance) {
  FilterState fs;
  fs.x = {5.0, 0.0};
  fs.P = 0.01 * Eigen::Matrix2d::Identity();
  fs.Q = 0.02 * Eigen::Matrix2d::Identity();
  const FilterInput u{2.0, {0.0, 0.0}, 1};
  const auto out = predict_step(fs, u, 0.5, 0.001);
  EXPECT_NEAR(out.x.norm(), 5.0, 1e-3);
  EXPECT_NEAR(std::atan2(out.x.y(), out.x.x()), 0.2, 1e-3);
  EXPECT_GT(out.P.trace(), fs.P.trace());
  EXPECT_NEAR(out.P(0, 1), out.P(1, 0), 1e-15);
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(out.P);
  EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
}

TEST(Ekf, CorrectMatchesScalarGain) {
  FilterState fs;
  fs.x = {1.0, 1.0};
  fs.P = 3.0 * Eigen::Matrix2d::Identity();
  fs.R = 1.0 * Eigen::Matrix2d::Identity();
  const auto out = correct_step(fs, {0.0, {2.0, -1.0}});
  EXPECT_LT((out.x - Eigen::Vector2d(1.75, -0.5)).norm(), 1e-14);
  EXPECT_LT((out.P - 0.75 * Eigen::Matrix2d::Identity()).norm(), 1e-14);
}

TEST(Ekf, CorrectRejectsSingularInnovation) {
  FilterState fs;
  EXPECT_THROW(correct_step(fs, {0.0, {1.0, 1.0}}), Error);
  fs.R = Eigen::Matrix2d::Identity();
  EXPECT_THROW(correct_step(fs, {0.0, {NAN, 1.0}}), Error);
}

std::vector<Observation> noisy_circle(std::uint64_t seed, double sigma, std::vector<Point2>* truth) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  const double r = 5.0, w = 2.0 / r, hz = 20.0;
  std::vector<Observation> obs;
  for (int i = 0; i < 400; ++i) {
    const double t = i / hz;
    const Point2 p = r * Point2(std::cos(w * t), std::sin(w * t));
    truth->push_back(p);
    obs.push_back({t, p + Point2(n(rng), n(rng))});
  }
  return obs;
}

TEST(Ekf, TrackerImprovesOnRawMeasurements) {
  FilterConfig cfg;
  int wins = 0;
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    std::vector<Point2> truth;
    const auto obs = noisy_circle(seed, 0.1, &truth);
    const auto out = track(obs, cfg);
    std::vector<Point2> raw, filt;
    for (std::size_t i = 0; i < out.size(); ++i) {
      raw.push_back(obs[i].pos);
      filt.push_back(out[i].filtered);
    }
    const std::size_t skip = 2 * cfg.window_len;
    if (position_rmse(filt, truth, skip) < position_rmse(raw, truth, skip)) ++wins;
  }
  EXPECT_GE(wins, 4);
}

TEST(Ekf, TrackerModes) {
  FilterConfig cfg;
  std::vector<Observation> line;
  for (int i = 0; i < 30; ++i) line.push_back({0.05 * i, {0.1 * i, 0.0}});
  const auto out = track(line, cfg);
  EXPECT_EQ(out.front().mode, TrackMode::Warmup);
  EXPECT_EQ(out.back().mode, TrackMode::Straight);
  EXPECT_NEAR(out.back().filtered.x(), 2.9, 1e-6);

  std::vector<Observation> still;
  for (int i = 0; i < 30; ++i) still.push_back({0.05 * i, {1.0, 1.0}});
  EXPECT_EQ(track(still, cfg).back().mode, TrackMode::Stationary);
}

TEST(Ekf, TrackerRejectsNonIncreasingTime) {
  Tracker tr(FilterConfig{});
  tr.update({0.0, {0.0, 0.0}});
  EXPECT_THROW(tr.update({0.0, {0.1, 0.0}}), Error);
}

TEST(Ekf, TrackerRejectsBadConfig) {
  FilterConfig cfg;
  cfg.window_len = 3;
  EXPECT_THROW(Tracker{cfg}, Error);
  cfg.window_len = 10;
  cfg.r_std = -1.0;
  EXPECT_THROW(Tracker{cfg}, Error);
}

TEST(Ekf, RmseArguments) {
  const std::vector<Point2> a = {{0, 0}, {1, 1}}, b = {{0, 0}};
  EXPECT_THROW(position_rmse(a, b), Error);
  EXPECT_THROW(position_rmse(a, a, 2), Error);
  const std::vector<Point2> c = {{3, 4}, {1, 1}};
  EXPECT_NEAR(position_rmse(c, a), std::sqrt(25.0 / 2.0 + 0.0), 1e-15);
}

}  // namespace
}  // namespace looptrack
