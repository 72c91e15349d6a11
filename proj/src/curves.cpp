#include "looptrack/curves.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "looptrack/error.hpp"

namespace looptrack {

namespace {

struct FamilyInfo {
  std::string_view name;
  int arity;
  int degree;
  double symmetry;
};

// Order matches the CurveFamily codes.
constexpr std::array<FamilyInfo, kFamilyCount> kInfo = {{
    {"circle_ellipse", 2, 2, kPi},
    {"astroid", 1, 6, kPi / 2.0},
    {"deltoid", 1, 4, kTwoPi / 3.0},
    {"limacon", 2, 4, kTwoPi},
    {"nephroid", 1, 6, kPi},
    {"quadrifolium", 1, 6, kPi / 2.0},
    {"squircle", 1, 4, kPi / 2.0},
    {"lemniscate_bernoulli", 1, 4, kPi},
    {"lemniscate_gerono", 1, 4, kPi},
}};

const FamilyInfo& info(CurveFamily family) {
  const int code = static_cast<int>(family);
  require(code >= 0 && code < kFamilyCount, ErrorKind::InvalidInput, "unknown curve family");
  return kInfo[static_cast<std::size_t>(code)];
}

double sq(double v) { return v * v; }
double cube(double v) { return v * v * v; }

// sign(v) * sqrt(|v|)
double signed_sqrt(double v) { return std::copysign(std::sqrt(std::fabs(v)), v); }

}  // namespace

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid input";
    case ErrorKind::Precondition: return "precondition violated";
    case ErrorKind::DegenerateGeometry: return "degenerate geometry";
    case ErrorKind::DegenerateMotion: return "degenerate motion";
    case ErrorKind::StraightLine: return "straight-line degenerate";
    case ErrorKind::Singularity: return "singularity";
    case ErrorKind::NumericalFailure: return "numerical failure";
    case ErrorKind::AlignmentFailure: return "alignment failure";
    case ErrorKind::IncompleteLoop: return "incomplete loop";
    case ErrorKind::InvalidInitialization: return "invalid initialization";
    case ErrorKind::Configuration: return "configuration error";
    case ErrorKind::Io: return "i/o error";
  }
  return "error";
}

std::string_view family_name(CurveFamily family) { return info(family).name; }

CurveFamily family_from_name(std::string_view name) {
  for (int i = 0; i < kFamilyCount; ++i) {
    if (kInfo[static_cast<std::size_t>(i)].name == name) return static_cast<CurveFamily>(i);
  }
  fail(ErrorKind::InvalidInput, "unknown curve family '" + std::string(name) + "'");
}

CurveFamily family_from_label(int label) {
  require(label >= 0 && label < kFamilyCount, ErrorKind::InvalidInput,
          "family label out of range: " + std::to_string(label));
  return static_cast<CurveFamily>(label);
}

int arity(CurveFamily family) { return info(family).arity; }
int degree(CurveFamily family) { return info(family).degree; }
double symmetry_period(CurveFamily family) { return info(family).symmetry; }

void validate(CurveFamily family, const CanonicalParams& params) {
  require(std::isfinite(params.a) && params.a > 0.0, ErrorKind::InvalidInput,
          "curve parameter a must be finite and positive");
  if (arity(family) == 2) {
    require(params.b.has_value(), ErrorKind::InvalidInput,
            std::string(family_name(family)) + " requires parameter b");
    require(std::isfinite(*params.b) && *params.b > 0.0, ErrorKind::InvalidInput,
            "curve parameter b must be finite and positive");
  } else {
    require(!params.b.has_value(), ErrorKind::InvalidInput,
            std::string(family_name(family)) + " takes no parameter b");
  }
}

double length_scale(CurveFamily family, const CanonicalParams& params) {
  if (family == CurveFamily::Limacon) return params.a + params.b.value_or(0.0);
  return params.a;
}

double implicit_value(CurveFamily family, const CanonicalParams& params, const Point2& p) {
  require(all_finite(p), ErrorKind::InvalidInput, "non-finite point coordinates");
  const double x = p.x(), y = p.y();
  const double a = params.a;
  const double x2 = x * x, y2 = y * y, r2 = x2 + y2, a2 = a * a;
  switch (family) {
    case CurveFamily::CircleEllipse: {
      const double b = params.b.value_or(a);
      return x2 / a2 + y2 / (b * b) - 1.0;
    }
    case CurveFamily::Astroid:
      // x^(2/3) + y^(2/3) = a^(2/3), cleared of fractional powers.
      return cube(r2 - a2) + 27.0 * a2 * x2 * y2;
    case CurveFamily::Deltoid:
      return r2 * r2 + 18.0 * a2 * r2 - 27.0 * a2 * a2 - 8.0 * a * (x2 * x - 3.0 * x * y2);
    case CurveFamily::Limacon: {
      const double b = params.b.value_or(a);
      return sq(r2 - a * x) - b * b * r2;
    }
    case CurveFamily::Nephroid:
      return cube(r2 - 4.0 * a2) - 108.0 * a2 * a2 * y2;
    case CurveFamily::Quadrifolium:
      return cube(r2) - a2 * sq(x2 - y2);
    case CurveFamily::Squircle:
      return x2 * x2 + y2 * y2 - a2 * a2;
    case CurveFamily::LemniscateBernoulli:
      return r2 * r2 - 2.0 * a2 * (x2 - y2);
    case CurveFamily::LemniscateGerono:
      return x2 * x2 - a2 * (x2 - y2);
  }
  fail(ErrorKind::InvalidInput, "unknown curve family");
}

Point2 point_at(CurveFamily family, const CanonicalParams& params, double t) {
  const double a = params.a;
  const double c = std::cos(t), s = std::sin(t);
  switch (family) {
    case CurveFamily::CircleEllipse:
      return {a * c, params.b.value_or(a) * s};
    case CurveFamily::Astroid:
      return {a * c * c * c, a * s * s * s};
    case CurveFamily::Deltoid:
      // three-cusped hypocycloid, cusp at (3a, 0)
      return {2.0 * a * c + a * std::cos(2.0 * t), 2.0 * a * s - a * std::sin(2.0 * t)};
    case CurveFamily::Limacon: {
      // polar r = b + a cos t about the origin
      const double r = params.b.value_or(a) + a * c;
      return {r * c, r * s};
    }
    case CurveFamily::Nephroid:
      return {a * (3.0 * c - std::cos(3.0 * t)), a * (3.0 * s - std::sin(3.0 * t))};
    case CurveFamily::Quadrifolium: {
      const double r = a * std::cos(2.0 * t);
      return {r * c, r * s};
    }
    case CurveFamily::Squircle:
      return {a * signed_sqrt(c), a * signed_sqrt(s)};
    case CurveFamily::LemniscateBernoulli: {
      const double d = 1.0 + s * s;
      return {a * std::numbers::sqrt2 * c / d, a * std::numbers::sqrt2 * s * c / d};
    }
    case CurveFamily::LemniscateGerono:
      return {a * c, a * s * c};
  }
  fail(ErrorKind::InvalidInput, "unknown curve family");
}

std::vector<Point2> sample_parametric(CurveFamily family, const CanonicalParams& params,
                                      std::size_t n) {
  validate(family, params);
  require(n >= 4, ErrorKind::InvalidInput, "sample_parametric needs n >= 4");
  std::vector<Point2> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(point_at(family, params, kTwoPi * static_cast<double>(i) / static_cast<double>(n)));
  }
  return out;
}

ArcLengthTable::ArcLengthTable(CurveFamily family, const CanonicalParams& params,
                               std::size_t segments)
    : family_(family), params_(params), step_(kTwoPi / static_cast<double>(std::max<std::size_t>(segments, 8))) {
  validate(family, params);
  const std::size_t n = std::max<std::size_t>(segments, 8);
  cumulative_.resize(n + 1);
  cumulative_[0] = 0.0;
  Point2 prev = point_at(family, params, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    const Point2 cur = point_at(family, params, step_ * static_cast<double>(i));
    cumulative_[i] = cumulative_[i - 1] + (cur - prev).norm();
    prev = cur;
  }
}

double ArcLengthTable::within(std::size_t lo, double t) const {
  const double t_lo = step_ * static_cast<double>(lo);
  return (point_at(family_, params_, t) - point_at(family_, params_, t_lo)).norm();
}

double ArcLengthTable::parameter_at(double s) const {
  const double total = perimeter();
  s = std::fmod(s, total);
  if (s < 0.0) s += total;
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  std::size_t hi = static_cast<std::size_t>(std::distance(cumulative_.begin(), it));
  hi = std::clamp<std::size_t>(hi, 1, cumulative_.size() - 1);
  const std::size_t lo = hi - 1;
  const double target = s - cumulative_[lo];
  if (target <= 0.0) return step_ * static_cast<double>(lo);
  // Bisect on the chord inside the segment. Linear interpolation in t is badly
  // off where the parametrization has a vertical tangent (the squircle at its axes).
  double a = step_ * static_cast<double>(lo), b = step_ * static_cast<double>(hi);
  for (int k = 0; k < 60 && b - a > 1e-15; ++k) {
    const double mid = 0.5 * (a + b);
    (within(lo, mid) < target ? a : b) = mid;
  }
  return 0.5 * (a + b);
}

double ArcLengthTable::arclength_at(double t) const {
  t = wrap_angle(t, kTwoPi, 0.0);
  const auto lo = std::min(static_cast<std::size_t>(t / step_), cumulative_.size() - 2);
  return std::min(cumulative_[lo] + within(lo, t), cumulative_[lo + 1]);
}

std::vector<Point2> sample_arclength(CurveFamily family, const CanonicalParams& params,
                                     std::size_t n, double t0) {
  require(n >= 4, ErrorKind::InvalidInput, "sample_arclength needs n >= 4");
  const ArcLengthTable table(family, params);
  const double s0 = table.arclength_at(t0);
  const double step = table.perimeter() / static_cast<double>(n);
  std::vector<Point2> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(point_at(family, params, table.parameter_at(s0 + step * static_cast<double>(i))));
  }
  return out;
}

}  // namespace looptrack
