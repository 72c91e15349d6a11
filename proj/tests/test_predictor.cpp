#include "looptrack/predictor.hpp"

#include <gtest/gtest.h>

#include <random>

#include "looptrack/error.hpp"

namespace looptrack {
namespace {

Point2 on_circle(double r, double angle) { return r * Point2(std::cos(angle), std::sin(angle)); }

std::vector<TimedPoint> circle_states(double r, double delta, int n, double dt = 0.1) {
  std::vector<TimedPoint> s;
  for (int i = 0; i < n; ++i) s.push_back({dt * i, on_circle(r, delta * i)});
  return s;
}

TEST(Predictor, ObserveRecoversEvolution) {
  const auto states = circle_states(3.0, 0.05, 10);
  const auto obs = observe_phase(states);
  EXPECT_NEAR(obs.evolution.c, std::cos(0.05), 1e-9);
  EXPECT_NEAR(obs.evolution.s, std::sin(0.05), 1e-9);
  EXPECT_NEAR(obs.mean_dt, 0.1, 1e-15);
  EXPECT_NEAR(obs.mean_speed, 2.0 * 3.0 * std::sin(0.025) / 0.1, 1e-12);
  EXPECT_LT((obs.last_displacement - (states[9].pos - states[8].pos)).norm(), 1e-14);
}

TEST(Predictor, ObserveStraightLine) {
  std::vector<TimedPoint> s;
  for (int i = 0; i < 6; ++i) s.push_back({0.5 * i, {1.0 * i, 2.0 * i}});
  const auto obs = observe_phase(s);
  EXPECT_NEAR(obs.evolution.c, 1.0, 1e-15);
  EXPECT_NEAR(obs.evolution.s, 0.0, 1e-15);
}

TEST(Predictor, ObserveIrregularSampling) {
  // constant angular rate, uneven timestamps: interval-normalized velocities still rotate uniformly
  std::vector<TimedPoint> s;
  const double times[] = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  for (double t : times) s.push_back({t, on_circle(2.0, 0.4 * t)});
  EXPECT_NEAR(observe_phase(s).evolution.angle(), 0.04, 1e-9);
}

TEST(Predictor, ObservePreconditions) {
  EXPECT_THROW(observe_phase(circle_states(1.0, 0.1, 3)), Error);
  auto s = circle_states(1.0, 0.1, 5);
  s[3].t = s[2].t;
  EXPECT_THROW(observe_phase(s), Error);
  std::vector<TimedPoint> still(6);
  for (int i = 0; i < 6; ++i) still[i] = {0.1 * i, {1.0, 1.0}};
  try {
    observe_phase(still);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateMotion);
  }
}

TEST(Predictor, StraightContinuation) {
  const auto h = predict_horizon({0.0, {0.0, 0.0}}, {1.0, 0.0}, {1.0, 0.0}, 3, 0.5);
  ASSERT_EQ(h.waypoints.size(), 3u);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(h.waypoints[j].pos.x(), j + 1.0, 1e-15);
    EXPECT_NEAR(h.waypoints[j].t, 0.5 * (j + 1), 1e-15);
  }
}

TEST(Predictor, FullLoopCloses) {
  const double delta = kTwoPi / 100.0;
  const auto states = circle_states(1.0, delta, 10);
  const auto obs = observe_phase(states);
  const auto h = predict_horizon(states.back(), obs.evolution, obs.last_displacement, 100, obs.mean_dt);
  EXPECT_LT((h.waypoints.back().pos - states.back().pos).norm(), 1e-6);
}

TEST(Predictor, MatchesAnalyticCircle) {
  const double delta = 0.07, r = 4.0;
  const auto states = circle_states(r, delta, 10);
  const auto obs = observe_phase(states);
  const auto h = predict_horizon(states.back(), obs.evolution, obs.last_displacement, 10, obs.mean_dt);
  double worst = 0.0;
  for (int j = 0; j < 10; ++j) worst = std::max(worst, (h.waypoints[j].pos - on_circle(r, delta * (10 + j))).norm());
  EXPECT_LT(worst, 1e-9);
}

TEST(Predictor, DisplacementsKeepTheirLength) {
  const EvolutionMatrix ev{std::cos(0.3), std::sin(0.3)};
  const Point2 d0(0.3, -0.4);
  const auto h = predict_horizon({0.0, {1.0, 1.0}}, ev, d0, 25, 1.0);
  Point2 prev(1.0, 1.0);
  for (const auto& w : h.waypoints) {
    EXPECT_NEAR((w.pos - prev).norm(), 0.5, 1e-14);
    prev = w.pos;
  }
}

TEST(Predictor, HorizonComposes) {
  const EvolutionMatrix ev{std::cos(-0.2), std::sin(-0.2)};
  const Point2 d0(1.0, 0.5);
  const TimedPoint anchor{2.0, {3.0, -1.0}};
  const auto full = predict_horizon(anchor, ev, d0, 12, 0.1);
  const auto first = predict_horizon(anchor, ev, d0, 6, 0.1);
  const Point2 last_disp = first.waypoints[5].pos - first.waypoints[4].pos;
  const auto second = predict_horizon(first.waypoints[5], ev, last_disp, 6, 0.1);
  for (int j = 0; j < 6; ++j) {
    EXPECT_LT((second.waypoints[j].pos - full.waypoints[6 + j].pos).norm(), 1e-12);
    EXPECT_NEAR(second.waypoints[j].t, full.waypoints[6 + j].t, 1e-12);
  }
}

TEST(Predictor, HorizonPreconditions) {
  const EvolutionMatrix ev;
  EXPECT_THROW(predict_horizon({}, ev, {1.0, 0.0}, 0, 0.1), Error);
  EXPECT_THROW(predict_horizon({}, ev, {0.0, 0.0}, 3, 0.1), Error);
  EXPECT_THROW(predict_horizon({}, ev, {1.0, 0.0}, 3, 0.0), Error);
}

TEST(Predictor, DeadReckoningIsStraight) {
  const auto h = dead_reckoning({0.0, {1.0, 2.0}}, {0.5, 0.0}, 4, 0.2);
  EXPECT_NEAR(h.waypoints.back().pos.x(), 3.0, 1e-15);
  EXPECT_NEAR(h.waypoints.back().pos.y(), 2.0, 1e-15);
}

// Noisy circle, sigma = 5% of the radius: the evolution matrix should beat a
// straight-line extrapolation at m = 10 in nearly every trial.
TEST(Predictor, BeatsDeadReckoningOnNoisyCircle) {
  const double r = 1.0, delta = kTwoPi / 20.0, sigma = 0.05 * r;
  int wins = 0;
  const int trials = 50;
  for (int seed = 0; seed < trials; ++seed) {
    std::mt19937_64 rng(1000 + seed);
    std::normal_distribution<double> n(0.0, sigma);
    std::vector<TimedPoint> states;
    for (int i = 0; i < 10; ++i) states.push_back({0.1 * i, on_circle(r, delta * i) + Point2(n(rng), n(rng))});
    const auto obs = observe_phase(states);
    const auto h = predict_horizon(states.back(), obs.evolution, obs.last_displacement, 10, obs.mean_dt);
    const auto dr = dead_reckoning(states.back(), obs.last_displacement, 10, obs.mean_dt);
    const Point2 truth = on_circle(r, delta * 19);
    if ((h.waypoints.back().pos - truth).norm() < (dr.waypoints.back().pos - truth).norm()) ++wins;
  }
  EXPECT_GE(wins, 45);
}

}  // namespace
}  // namespace looptrack
