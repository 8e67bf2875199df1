#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "voltvar/control.hpp"
#include "voltvar/linalg.hpp"
#include "voltvar/network.hpp"
#include "voltvar/powerflow.hpp"

namespace voltvar {

/// Everything the control dynamics need: the linear model v = X q + vtilde,
/// nominal voltages, and one curve and reactive box per bus.
struct ControlProblem {
  Matrix x;
  Vector vtilde;
  Vector v_nom;
  std::vector<ControlCurve> curves;
  std::vector<ReactiveLimits> limits;

  int size() const noexcept { return static_cast<int>(vtilde.size()); }
  /// Buses whose reactive box is not a single point.
  std::vector<int> controllable() const;
  /// Throws Error(kDimensionMismatch) if the members disagree in size.
  void validate() const;
};

/// Curves come from each inverter's own record unless `override_curves` is
/// set or the record has none; buses without an inverter get a fixed q = 0.
ControlProblem make_problem(const Feeder& feeder, const SensitivityMatrices& mats,
                            const ControlCurve& default_curve, bool override_curves = false);

/// Maps reactive injections to bus voltages.
class Plant {
 public:
  static Plant linear(const ControlProblem& problem);
  static Plant distflow(const Feeder& feeder, const DistFlowOptions& options = {});

  PlantKind kind() const noexcept { return kind_; }
  Vector voltages(const Vector& q) const;

 private:
  Plant() = default;

  PlantKind kind_ = PlantKind::kLinear;
  Matrix x_;
  Vector vtilde_;
  std::shared_ptr<const Feeder> feeder_;
  DistFlowOptions options_;
};

enum class ControllerKind { kD1, kD2, kD3 };

std::string_view to_string(ControllerKind kind);
ControllerKind controller_kind_from_string(std::string_view name);

struct ControllerConfig {
  ControllerKind kind = ControllerKind::kD1;
  double gamma2 = 1e-3;
  double gamma3 = 0.5;

  /// Throws Error(kInvalidArgument) for a non-finite or non-positive stepsize
  /// of the selected controller.
  void validate() const;
};

/// f(v - v_nom) per bus, before projection.
Vector control_signal(const ControlProblem& problem, const Vector& v);

/// Subgradient of F at q with the voltage measured at v, using the four-case
/// selection at q_i = 0 (no smoothing).
Vector subgradient(const ControlProblem& problem, const Vector& q, const Vector& v);

/// Non-incremental: q(t+1) = [f(v(t) - v_nom)]_Omega.
Vector step_d1(const ControlProblem& problem, const Vector& v);
/// Subgradient: q(t+1) = [q(t) - gamma2 * dF(q(t))]_Omega.
Vector step_d2(const ControlProblem& problem, const Vector& q, const Vector& v, double gamma2);
/// Pseudo-gradient: q(t+1) = [(1 - gamma3) q(t) + gamma3 f(v(t) - v_nom)]_Omega.
Vector step_d3(const ControlProblem& problem, const Vector& q, const Vector& v, double gamma3);
Vector step(const ControlProblem& problem, const ControllerConfig& config, const Vector& q, const Vector& v);

struct ObjectiveBreakdown {
  double cost = 0.0;       // sum_i C_i(q_i)
  double quadratic = 0.0;  // 1/2 q^T X q
  double linear = 0.0;     // q^T (vtilde - v_nom)
  double total = 0.0;
};

/// F(q) = C(q) + 1/2 q^T X q + q^T (vtilde - v_nom).
ObjectiveBreakdown objective(const ControlProblem& problem, const Vector& q);

/// C(q) + 1/2 (v - v_nom)^T X^-1 (v - v_nom) - 1/2 dv^T X^-1 dv with
/// v = X q + vtilde and dv = vtilde - v_nom. Equals objective(q).total.
double tradeoff_objective(const ControlProblem& problem, const Vector& q);
/// The q-independent term -1/2 dv^T X^-1 dv of the trade-off form.
double tradeoff_constant(const ControlProblem& problem);

/// Smallest value of g^T (c - q) over the corners c of Omega, where g is the
/// subgradient in dF(q) closest to zero. Non-negative (up to rounding) iff q
/// is optimal.
double optimality_certificate(const ControlProblem& problem, const Vector& q);

struct D1ConditionReport {
  double sigma = 0.0;             // sigma_max(A X) on controllable buses
  bool sufficient = false;        // sigma < 1
  double corollary_value = 0.0;   // max(alpha_bar) * max row sum of X
  bool corollary = false;         // corollary_value < 1
  double holder_bound = 0.0;      // sqrt(||A X||_1 ||A X||_inf)
  double critical_alpha = 0.0;    // 1 / sigma_max(X) for a homogeneous slope
  int controllable = 0;
};

D1ConditionReport check_d1_condition(const ControlProblem& problem);
/// Every bus treated as controllable.
D1ConditionReport check_d1_condition(std::span<const ControlCurve> curves, const Matrix& x);

/// lambda_max(A X) via the symmetric similar matrix A^1/2 X A^1/2.
double lambda_max_ax(const ControlProblem& problem);
/// 2 / (1 + lambda_max(A X)).
double d3_stepsize_bound(const ControlProblem& problem);
double d3_stepsize_bound(std::span<const ControlCurve> curves, const Matrix& x);

/// Lipschitz constant of q -> f(v(q) - v_nom) over Omega, i.e.
/// sigma_max(A X) restricted to controllable buses.
double lipschitz_constant(const ControlProblem& problem);

enum class Verdict { kConverged, kMaxIterations, kOscillating };
std::string_view to_string(Verdict verdict);

struct SimulationOptions {
  double tol = 1e-6;
  int max_iter = 10000;
  /// Record every k-th state (the initial and final states are always kept).
  int record_stride = 1;
  bool detect_oscillation = true;
  int oscillation_window = 50;
  /// Iterates with t >= average_from enter q_average; negative means
  /// max_iter / 2.
  int average_from = -1;
  bool record_objective = true;
};

struct TrajectoryState {
  int t = 0;
  Vector q;
  Vector v;
};

struct Trajectory {
  std::vector<TrajectoryState> states;
  /// residuals[t] = ||q(t+1) - q(t)||_inf
  std::vector<double> residuals;
  /// objective[t] = F(q(t)) for t = 0..steps (when recorded).
  std::vector<double> objective;
  Verdict verdict = Verdict::kMaxIterations;
  int steps = 0;
  Vector q_final;
  Vector v_final;
  /// Cesaro average of q(t) over t >= average_from; q_final when the run
  /// ended earlier.
  Vector q_average;
  int averaged = 0;
};

/// Iterates the controller against the plant from q0 (projected onto Omega
/// first). Converged once a step moves q by less than tol in the inf-norm.
/// Oscillating when the smallest residual of the latest window is no smaller
/// than that of the window before. Plant errors propagate.
Trajectory simulate(const ControlProblem& problem, const Plant& plant, const ControllerConfig& config,
                    const Vector& q0, const SimulationOptions& options = {});

struct EquilibriumOptions {
  double tol = 1e-10;
  int max_iter = 500000;
  /// gamma3 as a fraction of the D3 stepsize bound.
  double stepsize_fraction = 0.9;
};

struct EquilibriumReport {
  Vector q;
  Vector v;
  ObjectiveBreakdown objective;
  /// ||q - [f(X q + vtilde - v_nom)]_Omega||_inf
  double fixed_point_residual = 0.0;
  int iterations = 0;
  double gamma3 = 0.0;
};

/// Unique minimizer of F over Omega, found by running the pseudo-gradient
/// dynamics on the linear model. Errors: kMaxIterations.
EquilibriumReport solve_equilibrium(const ControlProblem& problem, const EquilibriumOptions& options = {});

/// Bound on ||dF||_2 over Omega: max over the 2n box-face centres and
/// `samples` uniform draws, times `inflation`.
double estimate_gradient_bound(const ControlProblem& problem, std::uint64_t seed, int samples = 1000,
                               double inflation = 1.1);

enum class RegretBound {
  /// sum_{tau<=t} (F(q(tau)) - F*) / t <= ||q(1) - q*||^2 / t + gamma2^2 G^2
  kAsStated,
  /// sum_{tau<=t} (F(q(tau)) - F*) / t <= ||q(1) - q*||^2 / (2 gamma2 t) + gamma2 G^2 / 2
  kStandard,
};

struct RegretAudit {
  bool holds = true;
  int checked = 0;
  int violations = 0;
  /// 1-based t of the first violation, 0 if none.
  int first_violation = 0;
  /// max over t of lhs - rhs.
  double worst_excess = 0.0;
};

/// Checks the running-average suboptimality bound of the subgradient dynamics
/// at every recorded t. Needs trajectory.objective for every step.
RegretAudit d2_regret_bound_check(const Trajectory& trajectory, const EquilibriumReport& equilibrium,
                                  double gamma2, double gradient_bound, RegretBound form = RegretBound::kAsStated);

}  // namespace voltvar
