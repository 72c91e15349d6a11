#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "looptrack/geometry.hpp"

namespace looptrack {

/// The nine closed-curve families. Integer codes double as classifier labels.
enum class CurveFamily : int {
  CircleEllipse = 0,
  Astroid = 1,
  Deltoid = 2,
  Limacon = 3,
  Nephroid = 4,
  Quadrifolium = 5,
  Squircle = 6,
  LemniscateBernoulli = 7,
  LemniscateGerono = 8,
};

inline constexpr int kFamilyCount = 9;

inline constexpr std::array<CurveFamily, kFamilyCount> kAllFamilies = {
    CurveFamily::CircleEllipse, CurveFamily::Astroid,  CurveFamily::Deltoid,
    CurveFamily::Limacon,       CurveFamily::Nephroid, CurveFamily::Quadrifolium,
    CurveFamily::Squircle,      CurveFamily::LemniscateBernoulli,
    CurveFamily::LemniscateGerono};

/// Snake-case name used in every file format, e.g. "lemniscate_bernoulli".
std::string_view family_name(CurveFamily family);
/// Inverse of family_name; throws InvalidInput on unknown names.
CurveFamily family_from_name(std::string_view name);
CurveFamily family_from_label(int label);
inline int family_label(CurveFamily family) { return static_cast<int>(family); }

/// 1 when the family uses `a` alone, 2 when it uses `a` and `b`.
int arity(CurveFamily family);

/// Polynomial degree of the implicit form.
int degree(CurveFamily family);

/// Angle by which the canonical curve maps onto itself (2*pi when there is none).
double symmetry_period(CurveFamily family);

/// Shape parameters of the canonical (origin-centered, unrotated) curve.
struct CanonicalParams {
  double a = 1.0;
  std::optional<double> b;  // only for arity-2 families

  static CanonicalParams of(double a) { return {a, std::nullopt}; }
  static CanonicalParams of(double a, double b) { return {a, b}; }
};

/// Throws InvalidInput when params do not match the family's arity or are non-positive.
void validate(CurveFamily family, const CanonicalParams& params);

/// Characteristic length used to make residuals dimensionless: `a` for most
/// families, a + b for the limacon.
double length_scale(CurveFamily family, const CanonicalParams& params);

/// f(x, y, a, b) in left-minus-right form; zero exactly on the curve.
double implicit_value(CurveFamily family, const CanonicalParams& params, const Point2& p);

/// Point of the standard parametrization at parameter t (period 2*pi).
Point2 point_at(CurveFamily family, const CanonicalParams& params, double t);

/// n points at uniform parameter steps t = 2*pi*i/n over one period. Requires n >= 4.
std::vector<Point2> sample_parametric(CurveFamily family, const CanonicalParams& params,
                                      std::size_t n);

/// Cumulative chord-length table over one period, used for constant-speed sampling.
class ArcLengthTable {
 public:
  ArcLengthTable(CurveFamily family, const CanonicalParams& params, std::size_t segments = 2048);

  double perimeter() const { return cumulative_.back(); }
  /// Parameter t at arc length s (taken modulo the perimeter).
  double parameter_at(double s) const;
  /// Arc length from t = 0 to parameter t (taken modulo 2*pi).
  double arclength_at(double t) const;

 private:
  // chord length from the start of segment `lo` to parameter t inside it
  double within(std::size_t lo, double t) const;

  CurveFamily family_;
  CanonicalParams params_;
  std::vector<double> cumulative_;
  double step_;
};

/// n points at uniform arc-length spacing starting at parameter t0.
std::vector<Point2> sample_arclength(CurveFamily family, const CanonicalParams& params,
                                     std::size_t n, double t0 = 0.0);

}  // namespace looptrack
