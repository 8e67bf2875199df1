#include "voltvar/control.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "voltvar/error.hpp"

namespace voltvar {
namespace {

constexpr double kBisectionTol = 1e-12;

double segment_slope(const CurvePoint& a, const CurvePoint& b) {
  return (b.q - a.q) / (b.v_err - a.v_err);
}

double table_eval(const std::vector<CurvePoint>& pts, double e) {
  if (e <= pts.front().v_err) {
    return pts.front().q + segment_slope(pts[0], pts[1]) * (e - pts.front().v_err);
  }
  const std::size_t last = pts.size() - 1;
  if (e >= pts.back().v_err) {
    return pts.back().q + segment_slope(pts[last - 1], pts[last]) * (e - pts.back().v_err);
  }
  auto it = std::upper_bound(pts.begin(), pts.end(), e,
                             [](double value, const CurvePoint& p) { return value < p.v_err; });
  const CurvePoint& hi = *it;
  const CurvePoint& lo = *(it - 1);
  return lo.q + segment_slope(lo, hi) * (e - lo.v_err);
}

double table_inverse(const std::vector<CurvePoint>& pts, double q) {
  const std::size_t last = pts.size() - 1;
  if (q >= pts.front().q) {
    return pts.front().v_err + (q - pts.front().q) / segment_slope(pts[0], pts[1]);
  }
  if (q <= pts.back().q) {
    return pts.back().v_err + (q - pts.back().q) / segment_slope(pts[last - 1], pts[last]);
  }
  for (std::size_t k = 0; k < last; ++k) {
    const CurvePoint& a = pts[k];
    const CurvePoint& b = pts[k + 1];
    if (a.q > b.q && q <= a.q && q >= b.q) {
      return a.v_err + (q - a.q) / segment_slope(a, b);
    }
  }
  // Unreachable for validated tables: q lies strictly between two values of a
  // non-increasing sequence and q != 0, so some strictly decreasing segment
  // brackets it.
  throw Error(ErrorCode::kInvalidArgument, "table inverse failed to bracket q");
}

double bisect_inverse(const std::function<double(double)>& f, double q, double edge) {
  // f is decreasing, so q > 0 lies left of the deadband and q < 0 right of it.
  const double dir = q > 0 ? -1.0 : 1.0;
  double inner = edge;
  double width = 1e-3;
  double outer = edge + dir * width;
  for (int i = 0; i < 200; ++i) {
    const double fo = f(outer);
    if ((q > 0 && fo >= q) || (q < 0 && fo <= q)) break;
    inner = outer;
    width *= 2.0;
    outer = edge + dir * width;
    if (i == 199) throw Error(ErrorCode::kNoConvergence, "curve inverse: q outside curve range");
  }
  double lo = std::min(inner, outer);
  double hi = std::max(inner, outer);
  while (hi - lo > kBisectionTol * std::max(1.0, std::abs(lo))) {
    const double mid = 0.5 * (lo + hi);
    // Left-branch (q > 0): f(mid) >= q means the root is to the right.
    const bool root_right = q > 0 ? f(mid) >= q : f(mid) > q;
    if (root_right) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

template <typename G>
double adaptive_simpson(const G& g, double a, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = g(lm);
  const double frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return adaptive_simpson(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace

ControlCurve ControlCurve::droop(double alpha, double deadband) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorCode::kValidation, "droop slope must be positive, got " + std::to_string(alpha));
  }
  if (!(deadband >= 0.0) || !std::isfinite(deadband)) {
    throw Error(ErrorCode::kValidation, "deadband must be non-negative");
  }
  ControlCurve c;
  c.kind_ = CurveKind::kDroop;
  c.alpha_ = alpha;
  c.alpha_bar_ = alpha;
  c.deadband_low_ = -deadband / 2.0;
  c.deadband_high_ = deadband / 2.0;
  return c;
}

ControlCurve ControlCurve::table(std::vector<CurvePoint> points) {
  if (points.size() < 2) throw Error(ErrorCode::kValidation, "curve table needs at least 2 points");
  for (std::size_t k = 0; k + 1 < points.size(); ++k) {
    const CurvePoint& a = points[k];
    const CurvePoint& b = points[k + 1];
    if (!(b.v_err > a.v_err)) {
      throw Error(ErrorCode::kValidation, "curve table v_err must be strictly increasing");
    }
    if (b.q > a.q) throw Error(ErrorCode::kValidation, "curve table is not monotone (q increases)");
    if (a.q == b.q && a.q != 0.0) {
      throw Error(ErrorCode::kValidation, "curve table is flat away from q = 0");
    }
  }
  const std::size_t last = points.size() - 1;
  if (!(segment_slope(points[0], points[1]) < 0.0) ||
      !(segment_slope(points[last - 1], points[last]) < 0.0)) {
    throw Error(ErrorCode::kValidation, "curve table end segments must be strictly decreasing");
  }

  ControlCurve c;
  c.kind_ = CurveKind::kTable;
  c.points_ = std::move(points);
  const auto& pts = c.points_;
  if (std::abs(table_eval(pts, 0.0)) > 1e-12) {
    throw Error(ErrorCode::kValidation, "curve table must pass through f(0) = 0");
  }

  double slope_max = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    slope_max = std::max(slope_max, -segment_slope(pts[k], pts[k + 1]));
  }
  c.alpha_bar_ = slope_max;

  auto first_zero = std::find_if(pts.begin(), pts.end(), [](const CurvePoint& p) { return p.q == 0.0; });
  if (first_zero == pts.end()) {
    c.deadband_low_ = 0.0;
    c.deadband_high_ = 0.0;
  } else {
    auto last_zero = std::find_if(pts.rbegin(), pts.rend(), [](const CurvePoint& p) { return p.q == 0.0; });
    c.deadband_low_ = std::min(first_zero->v_err, 0.0);
    c.deadband_high_ = std::max(last_zero->v_err, 0.0);
  }
  return c;
}

ControlCurve ControlCurve::custom(std::function<double(double)> f, double alpha_bar,
                                  double deadband_low, double deadband_high) {
  if (!f) throw Error(ErrorCode::kValidation, "custom curve needs a callable");
  if (!(alpha_bar > 0.0)) throw Error(ErrorCode::kValidation, "alpha_bar must be positive");
  if (!(deadband_low <= 0.0 && deadband_high >= 0.0)) {
    throw Error(ErrorCode::kValidation, "custom curve deadband must contain 0");
  }
  ControlCurve c;
  c.kind_ = CurveKind::kCustom;
  c.alpha_bar_ = alpha_bar;
  c.deadband_low_ = deadband_low;
  c.deadband_high_ = deadband_high;
  c.custom_ = std::move(f);
  return c;
}

bool ControlCurve::operator==(const ControlCurve& other) const {
  if (kind_ != other.kind_) return false;
  switch (kind_) {
    case CurveKind::kDroop:
      return alpha_ == other.alpha_ && deadband_low_ == other.deadband_low_ &&
             deadband_high_ == other.deadband_high_;
    case CurveKind::kTable:
      return points_ == other.points_;
    case CurveKind::kCustom:
      return this == &other;
  }
  return false;
}

double eval_curve(const ControlCurve& curve, double v_err) {
  switch (curve.kind_) {
    case CurveKind::kDroop: {
      const double half = curve.deadband_high_;
      return -curve.alpha_ * std::max(v_err - half, 0.0) + curve.alpha_ * std::max(-v_err - half, 0.0);
    }
    case CurveKind::kTable:
      return table_eval(curve.points_, v_err);
    case CurveKind::kCustom:
      if (v_err >= curve.deadband_low_ && v_err <= curve.deadband_high_) return 0.0;
      return curve.custom_(v_err);
  }
  return 0.0;
}

double inverse_curve(const ControlCurve& curve, double q) {
  if (q == 0.0) return 0.0;
  switch (curve.kind_) {
    case CurveKind::kDroop: {
      const double half = curve.deadband_high_;
      return q < 0.0 ? -q / curve.alpha_ + half : -q / curve.alpha_ - half;
    }
    case CurveKind::kTable:
      return table_inverse(curve.points_, q);
    case CurveKind::kCustom: {
      const double edge = q > 0.0 ? curve.deadband_low_ : curve.deadband_high_;
      return bisect_inverse([&curve](double e) { return eval_curve(curve, e); }, q, edge);
    }
  }
  return 0.0;
}

double curve_cost(const ControlCurve& curve, double q) {
  if (q == 0.0) return 0.0;
  switch (curve.kind_) {
    case CurveKind::kDroop:
      return q * q / (2.0 * curve.alpha_) + curve.deadband_high_ * std::abs(q);
    case CurveKind::kTable: {
      // f^-1 is linear in q between consecutive table values, so the
      // trapezoid rule on those breakpoints is exact.
      std::vector<double> breaks{0.0};
      for (const CurvePoint& p : curve.points_) {
        if ((q > 0.0 && p.q > 0.0 && p.q < q) || (q < 0.0 && p.q < 0.0 && p.q > q)) {
          breaks.push_back(p.q);
        }
      }
      breaks.push_back(q);
      if (q > 0.0) {
        std::sort(breaks.begin(), breaks.end());
      } else {
        std::sort(breaks.begin(), breaks.end(), std::greater<>());
      }
      breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
      const double limit_at_zero = q > 0.0 ? curve.deadband_low_ : curve.deadband_high_;
      double integral = 0.0;
      double prev_s = 0.0;
      double prev_g = limit_at_zero;
      for (std::size_t k = 1; k < breaks.size(); ++k) {
        const double s = breaks[k];
        const double g = inverse_curve(curve, s);
        integral += (s - prev_s) * (prev_g + g) / 2.0;
        prev_s = s;
        prev_g = g;
      }
      return -integral;
    }
    case CurveKind::kCustom: {
      const double limit_at_zero = q > 0.0 ? curve.deadband_low_ : curve.deadband_high_;
      auto g = [&](double s) { return s == 0.0 ? limit_at_zero : inverse_curve(curve, s); };
      const double fa = g(0.0);
      const double fm = g(q / 2.0);
      const double fb = g(q);
      const double whole = q / 6.0 * (fa + 4.0 * fm + fb);
      return -adaptive_simpson(g, 0.0, q, fa, fm, fb, whole, 1e-13, 40);
    }
  }
  return 0.0;
}

void validate(const Inverter& inverter) {
  if (!(inverter.s >= 0.0) || !std::isfinite(inverter.s)) {
    throw Error(ErrorCode::kValidation, "inverter capacity s must be non-negative");
  }
  if (!(inverter.p >= 0.0 && inverter.p <= inverter.s)) {
    throw Error(ErrorCode::kValidation, "inverter real power must satisfy 0 <= p <= s");
  }
  if (!(inverter.rho >= 0.0 && inverter.rho <= std::numbers::pi / 2 + 1e-15)) {
    throw Error(ErrorCode::kValidation, "inverter power-factor angle must lie in [0, pi/2]");
  }
}

ReactiveLimits reactive_limits(const Inverter& inverter) {
  validate(inverter);
  const double capacity = std::sqrt(std::max(inverter.s * inverter.s - inverter.p * inverter.p, 0.0));
  double qmax = capacity;
  // rho = pi/2 means cos(rho) = 0: the power-factor constraint p/s >= cos(rho)
  // is vacuous, including at p = 0 where p*tan(rho) is undefined.
  if (inverter.rho < std::numbers::pi / 2) {
    qmax = std::min(inverter.p * std::tan(inverter.rho), capacity);
  }
  return {-qmax, qmax};
}

double project(double q, const ReactiveLimits& limits) {
  return std::clamp(q, limits.min, limits.max);
}

Vector project_box(const Vector& q, std::span<const ReactiveLimits> limits) {
  if (static_cast<std::size_t>(q.size()) != limits.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "project_box: q and limits differ in length");
  }
  Vector out(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) out(i) = project(q(i), limits[static_cast<std::size_t>(i)]);
  return out;
}

double lipschitz_constant(std::span<const ControlCurve> curves, const Matrix& x) {
  if (static_cast<std::size_t>(x.rows()) != curves.size() || x.rows() != x.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "lipschitz_constant: curves and X differ in size");
  }
  Vector alpha(x.rows());
  for (std::size_t i = 0; i < curves.size(); ++i) alpha(static_cast<Eigen::Index>(i)) = curves[i].alpha_bar();
  return sigma_max(alpha.asDiagonal() * x);
}

}  // namespace voltvar
