#include "looptrack/curves.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "looptrack/error.hpp"

namespace looptrack {
namespace {

CanonicalParams params_for(CurveFamily f, double a = 1.5, double b = 0.9) {
  return arity(f) == 2 ? CanonicalParams::of(a, b) : CanonicalParams::of(a);
}

TEST(Curves, NamesRoundTrip) {
  for (auto f : kAllFamilies) {
    EXPECT_EQ(family_from_name(family_name(f)), f);
    EXPECT_EQ(family_from_label(family_label(f)), f);
  }
  EXPECT_EQ(family_name(CurveFamily::LemniscateBernoulli), "lemniscate_bernoulli");
}

TEST(Curves, UnknownNameAndLabelThrow) {
  EXPECT_THROW(family_from_name("hypotrochoid"), Error);
  EXPECT_THROW(family_from_label(9), Error);
  EXPECT_THROW(family_from_label(-1), Error);
}

TEST(Curves, ArityAndDegree) {
  EXPECT_EQ(arity(CurveFamily::CircleEllipse), 2);
  EXPECT_EQ(arity(CurveFamily::Limacon), 2);
  EXPECT_EQ(arity(CurveFamily::Astroid), 1);
  EXPECT_EQ(degree(CurveFamily::CircleEllipse), 2);
  EXPECT_EQ(degree(CurveFamily::Astroid), 6);
  EXPECT_EQ(degree(CurveFamily::Nephroid), 6);
  EXPECT_EQ(degree(CurveFamily::Quadrifolium), 6);
  EXPECT_EQ(degree(CurveFamily::Deltoid), 4);
  EXPECT_EQ(degree(CurveFamily::LemniscateGerono), 4);
}

TEST(Curves, ValidateRejectsBadParams) {
  EXPECT_THROW(validate(CurveFamily::Astroid, CanonicalParams::of(-1.0)), Error);
  EXPECT_THROW(validate(CurveFamily::Astroid, CanonicalParams::of(0.0)), Error);
  EXPECT_THROW(validate(CurveFamily::Astroid, CanonicalParams::of(NAN)), Error);
  EXPECT_THROW(validate(CurveFamily::Astroid, CanonicalParams::of(1.0, 1.0)), Error);
  EXPECT_THROW(validate(CurveFamily::Limacon, CanonicalParams::of(1.0)), Error);
  EXPECT_THROW(validate(CurveFamily::CircleEllipse, CanonicalParams::of(1.0, -2.0)), Error);
  EXPECT_NO_THROW(validate(CurveFamily::Limacon, CanonicalParams::of(1.0, 0.5)));
}

TEST(Curves, NonFinitePointRejected) {
  EXPECT_THROW(implicit_value(CurveFamily::Squircle, CanonicalParams::of(1.0), {NAN, 0.0}), Error);
}

// Every parametrized point satisfies its implicit equation.
TEST(Curves, ParametricPointsLieOnImplicitCurve) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> t_dist(0.0, kTwoPi), a_dist(0.3, 4.0);
  for (auto f : kAllFamilies) {
    for (int trial = 0; trial < 50; ++trial) {
      const double a = a_dist(rng);
      const auto p = params_for(f, a, a_dist(rng));
      const Point2 q = point_at(f, p, t_dist(rng));
      const double scale = std::pow(length_scale(f, p), f == CurveFamily::CircleEllipse ? 0 : degree(f));
      EXPECT_NEAR(implicit_value(f, p, q) / scale, 0.0, 1e-10) << family_name(f);
    }
  }
}

TEST(Curves, OffCurvePointsAreNonZero) {
  for (auto f : kAllFamilies) {
    const auto p = params_for(f);
    EXPECT_GT(std::fabs(implicit_value(f, p, {7.0, 5.0})), 1.0) << family_name(f);
  }
}

TEST(Curves, SymmetryPeriodMapsCurveOntoItself) {
  for (auto f : kAllFamilies) {
    const auto p = params_for(f);
    const double T = symmetry_period(f);
    if (T >= kTwoPi) continue;
    for (double t = 0.0; t < kTwoPi; t += 0.37) {
      const Point2 q = rotate(point_at(f, p, t), T);
      const double scale = std::pow(length_scale(f, p), degree(f));
      EXPECT_NEAR(implicit_value(f, p, q) / scale, 0.0, 1e-10) << family_name(f);
    }
  }
}

// Closed-form perimeters checked against the chord table.
TEST(Curves, PerimeterMatchesClosedForms) {
  const double a = 2.0;
  const double lemniscate_constant = std::pow(std::tgamma(0.25), 2) / (2.0 * std::sqrt(kTwoPi));
  struct Case { CurveFamily f; CanonicalParams p; double expected; };
  const double b = 1.2;
  const double e = std::sqrt(1.0 - b * b / (a * a));
  const Case cases[] = {
      {CurveFamily::CircleEllipse, CanonicalParams::of(a, a), kTwoPi * a},
      {CurveFamily::CircleEllipse, CanonicalParams::of(a, b), 4.0 * a * std::comp_ellint_2(e)},
      {CurveFamily::Astroid, CanonicalParams::of(a), 6.0 * a},
      {CurveFamily::Deltoid, CanonicalParams::of(a), 16.0 * a},
      {CurveFamily::Nephroid, CanonicalParams::of(a), 24.0 * a},
      {CurveFamily::LemniscateBernoulli, CanonicalParams::of(a),
       2.0 * lemniscate_constant * std::sqrt(2.0) * a},
  };
  for (const auto& c : cases) {
    const ArcLengthTable table(c.f, c.p, 8192);
    EXPECT_NEAR(table.perimeter() / c.expected, 1.0, 1e-6) << family_name(c.f);
  }
}

TEST(Curves, ArcLengthTableInversesAgree) {
  for (auto f : kAllFamilies) {
    const ArcLengthTable table(f, params_for(f));
    for (double t = 0.05; t < kTwoPi; t += 0.41) {
      EXPECT_NEAR(table.parameter_at(table.arclength_at(t)), t, 1e-9) << family_name(f);
    }
    EXPECT_NEAR(table.parameter_at(table.perimeter() + 0.25), table.parameter_at(0.25), 1e-12);
    EXPECT_NEAR(table.parameter_at(-0.25), table.parameter_at(table.perimeter() - 0.25), 1e-12);
  }
}

TEST(Curves, ArcLengthSamplesAreEquallySpaced) {
  for (auto f : kAllFamilies) {
    const auto p = params_for(f);
    const std::size_t n = 200;
    const auto pts = sample_arclength(f, p, n);
    ASSERT_EQ(pts.size(), n);
    const double step = ArcLengthTable(f, p).perimeter() / n;
    const bool cusped = f == CurveFamily::Astroid || f == CurveFamily::Deltoid || f == CurveFamily::Nephroid;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = (pts[(i + 1) % n] - pts[i]).norm();
      // a chord never exceeds its arc; away from cusps it is nearly as long
      EXPECT_LE(d, step * (1.0 + 1e-6)) << family_name(f) << " sample " << i;
      if (!cusped) EXPECT_GT(d, 0.97 * step) << family_name(f) << " sample " << i;
    }
  }
}

TEST(Curves, SampleCountsValidated) {
  EXPECT_THROW(sample_parametric(CurveFamily::Astroid, CanonicalParams::of(1.0), 3), Error);
  EXPECT_THROW(sample_arclength(CurveFamily::Astroid, CanonicalParams::of(1.0), 2), Error);
  EXPECT_EQ(sample_parametric(CurveFamily::Astroid, CanonicalParams::of(1.0), 4).size(), 4u);
}

TEST(Curves, StartParameterShiftsFirstSample) {
  const auto p = CanonicalParams::of(1.0, 1.0);
  const auto pts = sample_arclength(CurveFamily::CircleEllipse, p, 16, kPi / 2.0);
  EXPECT_NEAR(pts[0].x(), 0.0, 1e-9);
  EXPECT_NEAR(pts[0].y(), 1.0, 1e-9);
}

}  // namespace
}  // namespace looptrack
