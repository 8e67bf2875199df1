#pragma once

#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "voltvar/linalg.hpp"

namespace voltvar {

enum class CurveKind { kDroop, kTable, kCustom };

struct CurvePoint {
  double v_err;
  double q;

  bool operator==(const CurvePoint&) const = default;
};

/// A local Volt/VAR control function u = f(v - v_nom).
///
/// Curves are non-increasing, vanish on a deadband [deadband_low, deadband_high]
/// that contains 0, and are strictly decreasing with slope magnitude at most
/// alpha_bar() off the deadband. Construction validates these properties.
class ControlCurve {
 public:
  /// Piecewise-linear droop with slope -alpha outside a symmetric band of
  /// full width `deadband`.
  static ControlCurve droop(double alpha, double deadband);

  /// Piecewise-linear interpolation through points sorted by v_err; the end
  /// segments are extrapolated linearly.
  static ControlCurve table(std::vector<CurvePoint> points);

  /// Arbitrary monotone curve. `f` must be zero on [deadband_low,
  /// deadband_high] and strictly decreasing outside it. The inverse is found
  /// by bisection and the cost by adaptive quadrature.
  static ControlCurve custom(std::function<double(double)> f, double alpha_bar,
                             double deadband_low, double deadband_high);

  CurveKind kind() const noexcept { return kind_; }
  double alpha_bar() const noexcept { return alpha_bar_; }
  double deadband_low() const noexcept { return deadband_low_; }
  double deadband_high() const noexcept { return deadband_high_; }
  /// Full deadband width (deadband_high - deadband_low).
  double deadband() const noexcept { return deadband_high_ - deadband_low_; }

  /// Droop slope; only meaningful for kind() == kDroop.
  double alpha() const noexcept { return alpha_; }
  const std::vector<CurvePoint>& points() const noexcept { return points_; }

  bool operator==(const ControlCurve& other) const;

 private:
  friend double eval_curve(const ControlCurve&, double);
  friend double inverse_curve(const ControlCurve&, double);
  friend double curve_cost(const ControlCurve&, double);

  ControlCurve() = default;

  CurveKind kind_ = CurveKind::kDroop;
  double alpha_ = 0.0;
  double alpha_bar_ = 0.0;
  double deadband_low_ = 0.0;
  double deadband_high_ = 0.0;
  std::vector<CurvePoint> points_;
  std::function<double(double)> custom_;
};

/// f(v_err).
double eval_curve(const ControlCurve& curve, double v_err);

/// Generalized inverse with f^-1(0) = 0. For q > 0 the result lies at or
/// below deadband_low(), for q < 0 at or above deadband_high().
double inverse_curve(const ControlCurve& curve, double q);

/// C(q) = -integral_0^q f^-1(s) ds. Convex with C(0) = 0.
double curve_cost(const ControlCurve& curve, double q);

/// Inverter ratings in p.u. `rho` is the power-factor angle limit.
struct Inverter {
  double s = 0.0;
  double p = 0.0;
  double rho = std::numbers::pi / 2;
  std::optional<ControlCurve> curve;

  bool operator==(const Inverter&) const = default;
};

/// Throws Error(kValidation) unless 0 <= p <= s and 0 <= rho <= pi/2.
void validate(const Inverter& inverter);

struct ReactiveLimits {
  double min = 0.0;
  double max = 0.0;

  bool singleton() const noexcept { return min == max; }
  bool operator==(const ReactiveLimits&) const = default;
};

/// The reactive-power box implied by apparent-power and power-factor limits.
ReactiveLimits reactive_limits(const Inverter& inverter);

/// Buses without a controllable inverter hold q fixed.
inline ReactiveLimits fixed_injection(double q = 0.0) { return {q, q}; }

double project(double q, const ReactiveLimits& limits);

/// Componentwise clamp onto the box.
Vector project_box(const Vector& q, std::span<const ReactiveLimits> limits);

/// M = sigma_max(diag(alpha_bar) X), every bus treated as controllable.
double lipschitz_constant(std::span<const ControlCurve> curves, const Matrix& x);

}  // namespace voltvar
