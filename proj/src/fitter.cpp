#include "looptrack/fitter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "looptrack/error.hpp"

namespace looptrack {

namespace {

// Residual evaluator with the pose trigonometry hoisted out of the point loop.
// `scale` is the data's RMS radius; the ellipse form is already dimensionless.
struct ResidualKernel {
  CurveModel model;
  double cos_t, sin_t, inv_scale;

  ResidualKernel(const CurveModel& m, double scale)
      : model(m), cos_t(std::cos(m.pose.theta)), sin_t(std::sin(m.pose.theta)) {
    const int k = m.family == CurveFamily::CircleEllipse ? 0 : degree(m.family);
    inv_scale = 1.0 / std::pow(scale, k);
  }

  double operator()(const Point2& p) const {
    const double dx = p.x() - model.pose.x0, dy = p.y() - model.pose.y0;
    const Point2 q(cos_t * dx + sin_t * dy, -sin_t * dx + cos_t * dy);
    return implicit_value(model.family, model.params, q) * inv_scale;
  }
};

double data_scale(std::span<const Point2> points) {
  const double s = rms_radius(points);
  require(s > 0.0 && std::isfinite(s), ErrorKind::DegenerateGeometry, "points have no spatial extent");
  return s;
}

void evaluate(const CurveModel& m, std::span<const Point2> points, double scale, Eigen::VectorXd& out) {
  const ResidualKernel kernel(m, scale);
  out.resize(static_cast<Eigen::Index>(points.size()));
  for (std::size_t i = 0; i < points.size(); ++i) out(static_cast<Eigen::Index>(i)) = kernel(points[i]);
}

// Parameter vector layout: [log a, (log b), theta, x0, y0].
int parameter_count(CurveFamily family) { return arity(family) == 2 ? 5 : 4; }

Eigen::VectorXd pack(const CurveModel& m) {
  const bool two = arity(m.family) == 2;
  Eigen::VectorXd beta(two ? 5 : 4);
  int i = 0;
  beta(i++) = std::log(m.params.a);
  if (two) beta(i++) = std::log(m.params.b.value());
  beta(i++) = m.pose.theta;
  beta(i++) = m.pose.x0;
  beta(i++) = m.pose.y0;
  return beta;
}

CurveModel unpack(CurveFamily family, const Eigen::VectorXd& beta) {
  CurveModel m;
  m.family = family;
  int i = 0;
  m.params.a = std::exp(beta(i++));
  if (arity(family) == 2) m.params.b = std::exp(beta(i++));
  m.pose.theta = beta(i++);
  m.pose.x0 = beta(i++);
  m.pose.y0 = beta(i++);
  return m;
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

// Shape parameters stay within six decades of the data scale. A wrong family can
// otherwise slide toward a = 0 or a = inf, where exp() under- or overflows.
bool shapes_in_range(CurveFamily family, const Eigen::VectorXd& beta, double scale) {
  const double limit = std::log(1e6);
  const double log_scale = std::log(scale);
  const int shapes = arity(family);
  for (int i = 0; i < shapes; ++i) {
    if (std::fabs(beta(i) - log_scale) > limit) return false;
  }
  return true;
}

struct Moments {
  Point2 mean = Point2::Zero();
  double rms = 0.0;
  double angle = 0.0;  // principal axis
  double major = 0.0;  // eigenvalues of the second-moment matrix
  double minor = 0.0;
};

Moments moments(std::span<const Point2> pts) {
  Moments m;
  m.mean = centroid(pts);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (const auto& p : pts) {
    const Point2 d = p - m.mean;
    sxx += d.x() * d.x();
    syy += d.y() * d.y();
    sxy += d.x() * d.y();
  }
  const double n = static_cast<double>(pts.size());
  sxx /= n;
  syy /= n;
  sxy /= n;
  m.rms = std::sqrt(sxx + syy);
  m.angle = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  const double mid = 0.5 * (sxx + syy);
  const double half = std::hypot(0.5 * (sxx - syy), sxy);
  m.major = mid + half;
  m.minor = std::max(0.0, mid - half);
  return m;
}

// Shape statistics of the unit canonical curve, sampled at uniform arc length.
Moments canonical_moments(CurveFamily family, double b_over_a = 1.0) {
  const CanonicalParams unit =
      arity(family) == 2 ? CanonicalParams::of(1.0, b_over_a) : CanonicalParams::of(1.0);
  const auto pts = sample_arclength(family, unit, 512);
  return moments(pts);
}

CurveModel posed_start(CurveFamily family, const Moments& data, double theta, double b_over_a) {
  const Moments ref = canonical_moments(family, b_over_a);
  CurveModel m;
  m.family = family;
  const double a = ref.rms > 0.0 ? data.rms / ref.rms : data.rms;
  m.params.a = a;
  if (arity(family) == 2) m.params.b = a * b_over_a;
  m.pose.theta = theta;
  // canonical curves with an off-origin centroid (the limacon) need the offset undone
  const Point2 shift = rotate(ref.mean * a, theta);
  m.pose.x0 = data.mean.x() - shift.x();
  m.pose.y0 = data.mean.y() - shift.y();
  return m;
}

// Mean squared distance from the points to a dense polyline of the model,
// in units of the data scale. Comparable across families, unlike E^2.
double geometric_score(const CurveModel& model, std::span<const Point2> points, double scale) {
  const auto curve = sample_model(model, 2048);
  double acc = 0.0;
  for (const auto& p : points) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const Point2& a = curve[i];
      const Point2& b = curve[(i + 1) % curve.size()];
      const Point2 ab = b - a;
      const double len2 = ab.squaredNorm();
      const double u = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
      best = std::min(best, (a + u * ab - p).squaredNorm());
    }
    acc += best;
  }
  return acc / static_cast<double>(points.size()) / (scale * scale);
}

}  // namespace

std::vector<double> normalized_residuals(const CurveModel& model, std::span<const Point2> points) {
  validate(model);
  Eigen::VectorXd r;
  evaluate(model, points, data_scale(points), r);
  return {r.data(), r.data() + r.size()};
}

double normalized_e2(const CurveModel& model, std::span<const Point2> points) {
  validate(model);
  Eigen::VectorXd r;
  evaluate(model, points, data_scale(points), r);
  return r.squaredNorm();
}

CurveModel initial_guess(CurveFamily family, std::span<const Point2> points) {
  require(points.size() >= 8, ErrorKind::InvalidInput, "initial guess needs at least 8 points");
  for (const auto& p : points) require(all_finite(p), ErrorKind::InvalidInput, "non-finite point");
  const Moments data = moments(points);
  require(data.rms > 0.0, ErrorKind::DegenerateGeometry, "all points coincide");

  if (family == CurveFamily::CircleEllipse) {
    CurveModel m;
    m.family = family;
    m.pose = {data.angle, data.mean.x(), data.mean.y()};
    // E[x^2] = a^2 / 2 for a uniformly sampled ellipse
    m.params.a = std::sqrt(2.0 * data.major);
    m.params.b = std::max(std::sqrt(2.0 * data.minor), 1e-3 * m.params.a);
    return m;
  }
  const Moments ref = canonical_moments(family);
  return posed_start(family, data, data.angle - ref.angle, 1.0);
}

FitResult lm_fit(CurveFamily family, std::span<const Point2> points, const CurveModel& init,
                 const FitOptions& opts) {
  require(init.family == family, ErrorKind::InvalidInput, "initial model family mismatch");
  validate(init);
  const int np = parameter_count(family);
  require(points.size() >= static_cast<std::size_t>(np), ErrorKind::InvalidInput,
          "need at least as many points as free parameters");

  const double scale = data_scale(points);
  Eigen::VectorXd beta = pack(init);
  Eigen::VectorXd r, r_try, r_plus, r_minus;
  evaluate(init, points, scale, r);
  require(finite(r), ErrorKind::InvalidInitialization, "non-finite residuals at the initial model");

  FitResult out;
  double e2 = r.squaredNorm();
  out.e2_trace.push_back(e2);
  double lambda = opts.initial_damping;
  constexpr double kMaxDamping = 1e16;
  const auto m = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd jac(m, np);

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    if (e2 <= opts.e2_tolerance) {
      out.converged = true;
      break;
    }
    ++out.iterations;

    for (int j = 0; j < np; ++j) {
      const double h = 1e-6 * std::max(1.0, std::fabs(beta(j)));
      Eigen::VectorXd bp = beta, bm = beta;
      bp(j) += h;
      bm(j) -= h;
      evaluate(unpack(family, bp), points, scale, r_plus);
      evaluate(unpack(family, bm), points, scale, r_minus);
      jac.col(j) = (r_plus - r_minus) / (2.0 * h);
    }
    require(jac.allFinite(), ErrorKind::NumericalFailure, "non-finite Jacobian");

    const Eigen::VectorXd grad = jac.transpose() * r;
    if (grad.lpNorm<Eigen::Infinity>() <= opts.gradient_tolerance) {
      out.converged = true;
      break;
    }
    const Eigen::MatrixXd normal = jac.transpose() * jac;
    Eigen::VectorXd diag = normal.diagonal();
    const double floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
    diag = diag.cwiseMax(floor);

    bool accepted = false;
    bool small_step = false;
    double reduction = 0.0;
    while (lambda <= kMaxDamping) {
      Eigen::MatrixXd damped = normal;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      if (finite(step) && shapes_in_range(family, beta + step, scale)) {
        const Eigen::VectorXd trial = beta + step;
        evaluate(unpack(family, trial), points, scale, r_try);
        const double e2_try = finite(r_try) ? r_try.squaredNorm() : std::numeric_limits<double>::infinity();
        if (e2_try < e2) {
          reduction = (e2 - e2_try) / e2;
          small_step = step.norm() <= opts.step_tolerance * (beta.norm() + opts.step_tolerance);
          beta = trial;
          r.swap(r_try);
          e2 = e2_try;
          out.e2_trace.push_back(e2);
          lambda = std::max(lambda / opts.damping_down, 1e-15);
          accepted = true;
          break;
        }
      }
      lambda *= opts.damping_up;
    }
    if (!accepted) {
      // no downhill step at any damping: a minimum to within Jacobian precision,
      // unless nothing was ever accepted
      out.converged = out.e2_trace.size() > 1;
      break;
    }
    if (small_step || reduction < opts.relative_reduction_tolerance) {
      out.converged = true;
      break;
    }
  }

  out.model = canonicalize(unpack(family, beta));
  out.e2 = e2;
  return out;
}

FitResult fit_curve(CurveFamily family, std::span<const Point2> points, const FitOptions& opts) {
  const CurveModel first = initial_guess(family, points);
  FitResult best = lm_fit(family, points, first, opts);
  const double n = static_cast<double>(points.size());
  if (best.converged && best.e2 / n <= opts.multistart_threshold) return best;

  const Moments data = moments(points);
  const double period = symmetry_period(family);
  std::vector<double> ratios = {1.0};
  if (family == CurveFamily::Limacon) ratios = {1.0, 0.3, 3.0};

  for (double ratio : ratios) {
    for (int k = 0; k < opts.multistart_phases; ++k) {
      if (ratio == 1.0 && k == 0) continue;  // the first start above
      const double theta = first.pose.theta + period * k / std::max(1, opts.multistart_phases);
      CurveModel start = family == CurveFamily::CircleEllipse ? first : posed_start(family, data, theta, ratio);
      start.pose.theta = theta;
      FitResult candidate;
      try {
        candidate = lm_fit(family, points, start, opts);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::NumericalFailure || e.kind() == ErrorKind::InvalidInitialization) continue;
        throw;
      }
      if (candidate.e2 < best.e2 || (!best.converged && candidate.converged && candidate.e2 <= best.e2)) {
        best = std::move(candidate);
      }
    }
  }
  return best;
}

CurveModel grid_oracle(CurveFamily family, std::span<const Point2> points, const GridBounds& bounds,
                       int resolution) {
  require(resolution >= 10, ErrorKind::InvalidInput, "grid resolution must be at least 10");
  require(!points.empty(), ErrorKind::InvalidInput, "grid oracle needs points");
  const bool two = arity(family) == 2;
  auto check = [](const ParamRange& r, bool positive) {
    require(std::isfinite(r.lo) && std::isfinite(r.hi) && r.hi > r.lo, ErrorKind::InvalidInput,
            "grid bounds must be non-empty");
    require(!positive || r.lo > 0.0, ErrorKind::InvalidInput, "shape bounds must be positive");
  };
  check(bounds.a, true);
  if (two) check(bounds.b, true);
  check(bounds.theta, false);
  check(bounds.x0, false);
  check(bounds.y0, false);

  auto node = [resolution](const ParamRange& r, int i) {
    return r.lo + (r.hi - r.lo) * static_cast<double>(i) / static_cast<double>(resolution - 1);
  };
  const int nb = two ? resolution : 1;
  const double scale = data_scale(points);

  CurveModel best;
  double best_e2 = std::numeric_limits<double>::infinity();
  Eigen::VectorXd r;
  CurveModel m;
  m.family = family;
  for (int ia = 0; ia < resolution; ++ia) {
    m.params.a = node(bounds.a, ia);
    for (int ib = 0; ib < nb; ++ib) {
      m.params.b = two ? std::optional<double>(node(bounds.b, ib)) : std::nullopt;
      for (int it = 0; it < resolution; ++it) {
        m.pose.theta = node(bounds.theta, it);
        for (int ix = 0; ix < resolution; ++ix) {
          m.pose.x0 = node(bounds.x0, ix);
          for (int iy = 0; iy < resolution; ++iy) {
            m.pose.y0 = node(bounds.y0, iy);
            evaluate(m, points, scale, r);
            const double e2 = r.squaredNorm();
            if (e2 < best_e2) {
              best_e2 = e2;
              best = m;
            }
          }
        }
      }
    }
  }
  return best;
}

ResidualRanking classify_by_residual(std::span<const Point2> points, const FitOptions& opts) {
  ResidualRanking out;
  const double scale = data_scale(points);
  double best = std::numeric_limits<double>::infinity();
  for (CurveFamily family : kAllFamilies) {
    const auto label = static_cast<std::size_t>(family_label(family));
    out.fits[label] = fit_curve(family, points, opts);
    out.score[label] = geometric_score(out.fits[label].model, points, scale);
    if (out.score[label] < best) {
      best = out.score[label];
      out.best = family;
    }
  }
  return out;
}

}  // namespace looptrack
