#include "voltvar/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "voltvar/error.hpp"

namespace voltvar {
namespace {

std::vector<int> all_indices(int n) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  return idx;
}

Vector alpha_bars(std::span<const ControlCurve> curves, const std::vector<int>& idx) {
  Vector a(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    a(static_cast<Eigen::Index>(k)) = curves[static_cast<std::size_t>(idx[k])].alpha_bar();
  }
  return a;
}

D1ConditionReport d1_condition_on(std::span<const ControlCurve> curves, const Matrix& x, const std::vector<int>& idx) {
  D1ConditionReport r;
  r.controllable = static_cast<int>(idx.size());
  if (idx.empty()) {
    r.sufficient = true;
    r.corollary = true;
    r.critical_alpha = std::numeric_limits<double>::infinity();
    return r;
  }
  const Matrix xs = principal_submatrix(x, idx);
  const Vector a = alpha_bars(curves, idx);
  const Matrix ax = a.asDiagonal() * xs;
  r.sigma = sigma_max(ax);
  r.sufficient = r.sigma < 1.0;
  r.corollary_value = a.maxCoeff() * xs.rowwise().sum().maxCoeff();
  r.corollary = r.corollary_value < 1.0;
  const double norm1 = ax.cwiseAbs().colwise().sum().maxCoeff();
  const double norm_inf = ax.cwiseAbs().rowwise().sum().maxCoeff();
  r.holder_bound = std::sqrt(norm1 * norm_inf);
  r.critical_alpha = 1.0 / sigma_max(xs);
  return r;
}

double lambda_max_ax_on(std::span<const ControlCurve> curves, const Matrix& x, const std::vector<int>& idx) {
  if (idx.empty()) return 0.0;
  const Vector root_a = alpha_bars(curves, idx).cwiseSqrt();
  const Matrix sym = root_a.asDiagonal() * principal_submatrix(x, idx) * root_a.asDiagonal();
  return lambda_max_symmetric(sym);
}

// The element of dC_i(q_i) + e closest to zero.
double min_norm_subgradient(const ControlCurve& curve, double q, double e) {
  if (q != 0.0) return -inverse_curve(curve, q) + e;
  const double lo = e - curve.deadband_high();
  const double hi = e - curve.deadband_low();
  return std::clamp(0.0, lo, hi);
}

}  // namespace

std::vector<int> ControlProblem::controllable() const {
  std::vector<int> idx;
  for (std::size_t i = 0; i < limits.size(); ++i) {
    if (!limits[i].singleton()) idx.push_back(static_cast<int>(i));
  }
  return idx;
}

void ControlProblem::validate() const {
  const auto n = vtilde.size();
  if (x.rows() != n || x.cols() != n || v_nom.size() != n || static_cast<Eigen::Index>(curves.size()) != n ||
      static_cast<Eigen::Index>(limits.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, "control problem members disagree in size");
  }
}

ControlProblem make_problem(const Feeder& feeder, const SensitivityMatrices& mats, const ControlCurve& default_curve,
                            bool override_curves) {
  ControlProblem p;
  p.x = mats.x;
  p.vtilde = mats.vtilde;
  p.v_nom = feeder.v_nom();
  const int n = feeder.size();
  p.curves.reserve(static_cast<std::size_t>(n));
  p.limits.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const Inverter* inv = feeder.inverter_at(i);
    if (inv == nullptr) {
      p.curves.push_back(default_curve);
      p.limits.push_back(fixed_injection());
      continue;
    }
    p.limits.push_back(reactive_limits(*inv));
    p.curves.push_back(!override_curves && inv->curve ? *inv->curve : default_curve);
  }
  p.validate();
  return p;
}

Plant Plant::linear(const ControlProblem& problem) {
  Plant p;
  p.kind_ = PlantKind::kLinear;
  p.x_ = problem.x;
  p.vtilde_ = problem.vtilde;
  return p;
}

Plant Plant::distflow(const Feeder& feeder, const DistFlowOptions& options) {
  Plant p;
  p.kind_ = PlantKind::kDistFlow;
  p.feeder_ = std::make_shared<const Feeder>(feeder);
  p.options_ = options;
  return p;
}

Vector Plant::voltages(const Vector& q) const {
  if (kind_ == PlantKind::kLinear) {
    if (q.size() != vtilde_.size()) throw Error(ErrorCode::kDimensionMismatch, "plant: q has wrong length");
    return x_ * q + vtilde_;
  }
  return distflow_sweep(*feeder_, q, options_).v;
}

std::string_view to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kD1: return "d1";
    case ControllerKind::kD2: return "d2";
    case ControllerKind::kD3: return "d3";
  }
  return "?";
}

ControllerKind controller_kind_from_string(std::string_view name) {
  if (name == "d1") return ControllerKind::kD1;
  if (name == "d2") return ControllerKind::kD2;
  if (name == "d3") return ControllerKind::kD3;
  throw Error(ErrorCode::kInvalidArgument, "unknown controller '" + std::string(name) + "'");
}

void ControllerConfig::validate() const {
  auto positive = [](double g) { return std::isfinite(g) && g > 0.0; };
  if (kind == ControllerKind::kD2 && !positive(gamma2)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma2 must be finite and positive");
  }
  if (kind == ControllerKind::kD3 && !positive(gamma3)) {
    throw Error(ErrorCode::kInvalidArgument, "gamma3 must be finite and positive");
  }
}

Vector control_signal(const ControlProblem& problem, const Vector& v) {
  Vector u(problem.size());
  for (int i = 0; i < problem.size(); ++i) {
    u(i) = eval_curve(problem.curves[static_cast<std::size_t>(i)], v(i) - problem.v_nom(i));
  }
  return u;
}

Vector subgradient(const ControlProblem& problem, const Vector& q, const Vector& v) {
  Vector g(problem.size());
  for (int i = 0; i < problem.size(); ++i) {
    const ControlCurve& c = problem.curves[static_cast<std::size_t>(i)];
    const double e = v(i) - problem.v_nom(i);
    if (q(i) != 0.0) {
      g(i) = -inverse_curve(c, q(i)) + e;
    } else if (e > c.deadband_high()) {
      g(i) = -c.deadband_high() + e;
    } else if (e < c.deadband_low()) {
      g(i) = -c.deadband_low() + e;
    } else {
      g(i) = e;
    }
  }
  return g;
}

Vector step_d1(const ControlProblem& problem, const Vector& v) {
  return project_box(control_signal(problem, v), problem.limits);
}

Vector step_d2(const ControlProblem& problem, const Vector& q, const Vector& v, double gamma2) {
  return project_box(q - gamma2 * subgradient(problem, q, v), problem.limits);
}

Vector step_d3(const ControlProblem& problem, const Vector& q, const Vector& v, double gamma3) {
  const Vector u = control_signal(problem, v);
  Vector next(problem.size());
  for (int i = 0; i < problem.size(); ++i) next(i) = (1.0 - gamma3) * q(i) + gamma3 * u(i);
  return project_box(next, problem.limits);
}

Vector step(const ControlProblem& problem, const ControllerConfig& config, const Vector& q, const Vector& v) {
  switch (config.kind) {
    case ControllerKind::kD1: return step_d1(problem, v);
    case ControllerKind::kD2: return step_d2(problem, q, v, config.gamma2);
    case ControllerKind::kD3: return step_d3(problem, q, v, config.gamma3);
  }
  return q;
}

ObjectiveBreakdown objective(const ControlProblem& problem, const Vector& q) {
  if (q.size() != problem.size()) throw Error(ErrorCode::kDimensionMismatch, "objective: q has wrong length");
  ObjectiveBreakdown f;
  for (int i = 0; i < problem.size(); ++i) f.cost += curve_cost(problem.curves[static_cast<std::size_t>(i)], q(i));
  f.quadratic = 0.5 * q.dot(problem.x * q);
  f.linear = q.dot(problem.vtilde - problem.v_nom);
  f.total = f.cost + f.quadratic + f.linear;
  return f;
}

double tradeoff_constant(const ControlProblem& problem) {
  const Vector dv = problem.vtilde - problem.v_nom;
  return -0.5 * dv.dot(problem.x.llt().solve(dv));
}

double tradeoff_objective(const ControlProblem& problem, const Vector& q) {
  double cost = 0.0;
  for (int i = 0; i < problem.size(); ++i) cost += curve_cost(problem.curves[static_cast<std::size_t>(i)], q(i));
  const Vector dev = problem.x * q + problem.vtilde - problem.v_nom;
  return cost + 0.5 * dev.dot(problem.x.llt().solve(dev)) + tradeoff_constant(problem);
}

double optimality_certificate(const ControlProblem& problem, const Vector& q) {
  const Vector v = problem.x * q + problem.vtilde;
  double worst = 0.0;
  for (int i = 0; i < problem.size(); ++i) {
    const ReactiveLimits& box = problem.limits[static_cast<std::size_t>(i)];
    const double g = min_norm_subgradient(problem.curves[static_cast<std::size_t>(i)], q(i), v(i) - problem.v_nom(i));
    worst += std::min(g * (box.min - q(i)), g * (box.max - q(i)));
  }
  return worst;
}

D1ConditionReport check_d1_condition(const ControlProblem& problem) {
  problem.validate();
  return d1_condition_on(problem.curves, problem.x, problem.controllable());
}

D1ConditionReport check_d1_condition(std::span<const ControlCurve> curves, const Matrix& x) {
  if (static_cast<Eigen::Index>(curves.size()) != x.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "check_d1_condition: curves and X differ in size");
  }
  return d1_condition_on(curves, x, all_indices(static_cast<int>(x.rows())));
}

double lambda_max_ax(const ControlProblem& problem) {
  return lambda_max_ax_on(problem.curves, problem.x, problem.controllable());
}

double d3_stepsize_bound(const ControlProblem& problem) { return 2.0 / (1.0 + lambda_max_ax(problem)); }

double d3_stepsize_bound(std::span<const ControlCurve> curves, const Matrix& x) {
  if (static_cast<Eigen::Index>(curves.size()) != x.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "d3_stepsize_bound: curves and X differ in size");
  }
  return 2.0 / (1.0 + lambda_max_ax_on(curves, x, all_indices(static_cast<int>(x.rows()))));
}

double lipschitz_constant(const ControlProblem& problem) {
  const auto idx = problem.controllable();
  if (idx.empty()) return 0.0;
  const Vector a = alpha_bars(problem.curves, idx);
  return sigma_max(a.asDiagonal() * principal_submatrix(problem.x, idx));
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kConverged: return "Converged";
    case Verdict::kMaxIterations: return "MaxIterations";
    case Verdict::kOscillating: return "Oscillating";
  }
  return "?";
}

Trajectory simulate(const ControlProblem& problem, const Plant& plant, const ControllerConfig& config,
                    const Vector& q0, const SimulationOptions& options) {
  problem.validate();
  config.validate();
  if (q0.size() != problem.size()) throw Error(ErrorCode::kDimensionMismatch, "simulate: q0 has wrong length");
  if (options.max_iter < 0 || options.record_stride < 1 || options.oscillation_window < 1) {
    throw Error(ErrorCode::kInvalidArgument, "simulate: bad iteration options");
  }
  const int average_from = options.average_from < 0 ? options.max_iter / 2 : options.average_from;
  const int window = options.oscillation_window;

  Trajectory traj;
  traj.residuals.reserve(static_cast<std::size_t>(std::min(options.max_iter, 1 << 20)));
  Vector q = project_box(q0, problem.limits);
  Vector v = plant.voltages(q);
  Vector q_sum = Vector::Zero(problem.size());

  auto record = [&](int t, bool force) {
    if (force || t % options.record_stride == 0) {
      if (traj.states.empty() || traj.states.back().t != t) traj.states.push_back({t, q, v});
    }
    if (options.record_objective && static_cast<int>(traj.objective.size()) == t) {
      traj.objective.push_back(objective(problem, q).total);
    }
    if (t >= average_from) {
      q_sum += q;
      ++traj.averaged;
    }
  };

  record(0, true);
  int t = 0;
  traj.verdict = Verdict::kMaxIterations;
  while (t < options.max_iter) {
    const Vector next = step(problem, config, q, v);
    const double residual = (next - q).cwiseAbs().maxCoeff();
    traj.residuals.push_back(residual);
    q = next;
    v = plant.voltages(q);
    ++t;
    if (residual < options.tol) {
      traj.verdict = Verdict::kConverged;
      record(t, true);
      break;
    }
    record(t, t == options.max_iter);
    if (options.detect_oscillation && t % window == 0 && t >= 2 * window) {
      const auto end = traj.residuals.end();
      const double current = *std::min_element(end - window, end);
      const double previous = *std::min_element(end - 2 * window, end - window);
      if (current >= previous) {
        traj.verdict = Verdict::kOscillating;
        record(t, true);
        break;
      }
    }
  }
  traj.steps = t;
  traj.q_final = q;
  traj.v_final = v;
  traj.q_average = traj.averaged > 0 ? Vector(q_sum / traj.averaged) : q;
  return traj;
}

EquilibriumReport solve_equilibrium(const ControlProblem& problem, const EquilibriumOptions& options) {
  problem.validate();
  EquilibriumReport rep;
  rep.gamma3 = options.stepsize_fraction * d3_stepsize_bound(problem);
  Vector q = project_box(Vector::Zero(problem.size()), problem.limits);
  for (int it = 0; it <= options.max_iter; ++it) {
    const Vector v = problem.x * q + problem.vtilde;
    const Vector u = control_signal(problem, v);
    const Vector fixed = project_box(u, problem.limits);
    const double residual = (q - fixed).cwiseAbs().maxCoeff();
    if (residual < options.tol) {
      rep.q = q;
      rep.v = v;
      rep.objective = objective(problem, q);
      rep.fixed_point_residual = residual;
      rep.iterations = it;
      return rep;
    }
    Vector next(problem.size());
    for (int i = 0; i < problem.size(); ++i) next(i) = (1.0 - rep.gamma3) * q(i) + rep.gamma3 * u(i);
    q = project_box(next, problem.limits);
  }
  throw Error(ErrorCode::kMaxIterations,
              "equilibrium solver did not reach tol " + std::to_string(options.tol) + " in " +
                  std::to_string(options.max_iter) + " iterations");
}

double estimate_gradient_bound(const ControlProblem& problem, std::uint64_t seed, int samples, double inflation) {
  problem.validate();
  const auto idx = problem.controllable();
  auto norm_at = [&](const Vector& q) {
    const Vector g = subgradient(problem, q, problem.x * q + problem.vtilde);
    return gather(g, idx).norm();
  };
  Vector centre(problem.size());
  for (int i = 0; i < problem.size(); ++i) {
    const ReactiveLimits& b = problem.limits[static_cast<std::size_t>(i)];
    centre(i) = 0.5 * (b.min + b.max);
  }
  double best = 0.0;
  for (int i : idx) {
    for (double side : {problem.limits[static_cast<std::size_t>(i)].min, problem.limits[static_cast<std::size_t>(i)].max}) {
      Vector q = centre;
      q(i) = side;
      best = std::max(best, norm_at(q));
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int s = 0; s < samples; ++s) {
    Vector q(problem.size());
    for (int i = 0; i < problem.size(); ++i) {
      const ReactiveLimits& b = problem.limits[static_cast<std::size_t>(i)];
      q(i) = b.min + (b.max - b.min) * unit(rng);
    }
    best = std::max(best, norm_at(q));
  }
  return inflation * best;
}

RegretAudit d2_regret_bound_check(const Trajectory& trajectory, const EquilibriumReport& equilibrium, double gamma2,
                                  double gradient_bound, RegretBound form) {
  if (trajectory.states.empty() || trajectory.objective.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "regret audit needs a trajectory with recorded objective values");
  }
  // Rounding slack on the comparison; F values are O(1e-3) here.
  constexpr double kSlack = 1e-14;
  const double f_star = equilibrium.objective.total;
  const double dist2 = (trajectory.states.front().q - equilibrium.q).squaredNorm();
  const double g2 = gradient_bound * gradient_bound;

  RegretAudit audit;
  double sum = 0.0;
  for (std::size_t k = 0; k < trajectory.objective.size(); ++k) {
    const double t = static_cast<double>(k + 1);
    sum += trajectory.objective[k] - f_star;
    const double lhs = sum / t;
    const double rhs = form == RegretBound::kAsStated ? dist2 / t + gamma2 * gamma2 * g2
                                                      : dist2 / (2.0 * gamma2 * t) + gamma2 * g2 / 2.0;
    ++audit.checked;
    const double excess = lhs - rhs;
    audit.worst_excess = k == 0 ? excess : std::max(audit.worst_excess, excess);
    if (excess > kSlack) {
      ++audit.violations;
      if (audit.first_violation == 0) audit.first_violation = static_cast<int>(k + 1);
    }
  }
  audit.holds = audit.violations == 0;
  return audit;
}

}  // namespace voltvar
