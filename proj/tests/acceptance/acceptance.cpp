// Acceptance suite: one PASS/FAIL line per criterion.
//
//   voltvar_acceptance                 run criteria 1-12
//   voltvar_acceptance --criterion N   run one criterion (12 runs 1-11 first)
//   voltvar_acceptance --write-golden  regenerate the linearization golden file
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fixtures.hpp"
#include "voltvar/experiment.hpp"

using namespace voltvar;
using namespace voltvar::testing;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

std::string golden_path() { return std::string(VOLTVAR_GOLDEN_DIR) + "/linearization_sce42.json"; }

Scenario sce(double alpha, double deadband = 0.04) {
  RunSpec spec;
  spec.alpha = alpha;
  spec.deadband = deadband;
  return make_scenario(spec);
}

Vector box_corner(const ControlProblem& p, bool upper) {
  Vector q = Vector::Zero(p.size());
  for (int i : p.controllable()) {
    const ReactiveLimits& b = p.limits[static_cast<std::size_t>(i)];
    q(i) = upper ? b.max : b.min;
  }
  return q;
}

Vector uniform_in_box(const ControlProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector q(p.size());
  for (int i = 0; i < p.size(); ++i) {
    const ReactiveLimits& b = p.limits[static_cast<std::size_t>(i)];
    q(i) = b.min + (b.max - b.min) * u(rng);
  }
  return q;
}

Outcome criterion1() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  double worst = INFINITY;
  for (int k = 0; k < 200; ++k) {
    const int n = std::uniform_int_distribution<int>(2, 50)(rng);
    const auto m = sensitivity_matrices(random_tree(rng, {.n = n}));
    worst = std::min({worst, lambda_min_symmetric(m.x), lambda_min_symmetric(m.r)});
  }
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return {worst > 0.0 && secs < 10.0, "min eigenvalue over 200 trees " + fmt(worst) + ", " + fmt(secs) + " s"};
}

double inverse_error(const Feeder& f) {
  const Matrix x = sensitivity_matrices(f).x;
  return (x * explicit_inverse_x(f) - Matrix::Identity(f.size(), f.size())).cwiseAbs().rowwise().sum().maxCoeff();
}

Outcome criterion2() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    const int n = std::uniform_int_distribution<int>(2, 50)(rng);
    worst = std::max(worst, inverse_error(random_tree(rng, {.n = n, .root_degree_one = true})));
  }
  const double sce_err = inverse_error(load_feeder(std::string(kBuiltinSce42)));
  return {worst < 1e-8 && sce_err < 1e-8,
          "||X Xinv - I||_inf random max " + fmt(worst) + ", SCE " + fmt(sce_err)};
}

Outcome criterion3() {
  const Scenario s = sce(10.0);
  const ControlProblem& p = s.problem;
  const auto idx = p.controllable();
  const double m = check_d1_condition(p).sigma;
  std::mt19937_64 rng(303);
  int violations = 0;
  double worst_ratio = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Vector a = uniform_in_box(p, rng);
    const Vector b = uniform_in_box(p, rng);
    const Vector fa = gather(control_signal(p, p.x * a + p.vtilde), idx);
    const Vector fb = gather(control_signal(p, p.x * b + p.vtilde), idx);
    const double lhs = (fa - fb).norm();
    const double rhs = m * (a - b).norm();
    worst_ratio = std::max(worst_ratio, lhs / rhs);
    if (lhs > rhs * (1 + 1e-12)) ++violations;
  }
  // Every bus carrying the same slope, sampled over a common box.
  const ControlProblem full = full_problem(p.x, p.vtilde, ControlCurve::droop(10.0, 0.04), 0.5);
  const double m_full = check_d1_condition(full.curves, full.x).sigma;
  int full_violations = 0;
  for (int k = 0; k < 1000; ++k) {
    const Vector a = uniform_in_box(full, rng);
    const Vector b = uniform_in_box(full, rng);
    const double lhs = (control_signal(full, full.x * a + full.vtilde) - control_signal(full, full.x * b + full.vtilde)).norm();
    if (lhs > m_full * (a - b).norm() * (1 + 1e-12)) ++full_violations;
  }
  return {violations == 0 && full_violations == 0,
          "alpha 10, M " + fmt(m) + ", violations " + std::to_string(violations) + "/1000 (max ratio " +
              fmt(worst_ratio) + "); all-bus M " + fmt(m_full) + ", violations " + std::to_string(full_violations) +
              "/1000"};
}

Outcome criterion4() {
  const double alpha_star = check_d1_condition(sce(1.0).problem).critical_alpha;
  const Scenario s = sce(0.9 * alpha_star);
  const ControlProblem& p = s.problem;
  const double m = check_d1_condition(p).sigma;
  const auto eq = solve_equilibrium(p, {.tol = 1e-14});
  const auto traj = simulate(p, Plant::linear(p), {ControllerKind::kD1}, box_corner(p, true), {.tol = 1e-12});
  int bad = 0;
  for (std::size_t k = 0; k + 1 < traj.states.size(); ++k) {
    const double a = (traj.states[k].q - eq.q).norm();
    const double b = (traj.states[k + 1].q - eq.q).norm();
    // Slack covers the error in the reference equilibrium.
    if (a > 1e-8 && b > m * a + 1e-11) ++bad;
  }
  // Residuals are bounded by a geometric envelope with ratio M.
  int envelope_bad = 0;
  const double r0 = traj.residuals.front();
  for (std::size_t t = 0; t < traj.residuals.size(); ++t) {
    if (traj.residuals[t] > r0 * std::pow(m, static_cast<double>(t)) * (1 + 1e-9) + 1e-15) ++envelope_bad;
  }
  const bool pass = traj.verdict == Verdict::kConverged && std::abs(m - 0.9) < 1e-12 && bad == 0 &&
                    envelope_bad == 0 && traj.steps >= 30;
  return {pass, "alpha " + fmt(0.9 * alpha_star) + ", M " + fmt(m) + ", " + std::string(to_string(traj.verdict)) +
                    " in " + std::to_string(traj.steps) + " steps, contraction violations " + std::to_string(bad) +
                    ", envelope violations " + std::to_string(envelope_bad)};
}

Verdict d1_distflow(double alpha) {
  const Scenario s = sce(alpha);
  return simulate(s.problem, Plant::distflow(s.feeder), {ControllerKind::kD1}, Vector::Zero(s.problem.size()),
                  {.tol = 1e-6, .max_iter = 10000})
      .verdict;
}

Outcome criterion5() {
  const Verdict at10 = d1_distflow(10.0);
  const Verdict at27 = d1_distflow(27.0);
  // Boundary between the last converging and first non-converging slope.
  double lo = 10.0, hi = 27.0;
  bool bracketed = at10 == Verdict::kConverged && at27 != Verdict::kConverged;
  if (bracketed) {
    while (hi - lo > 0.05) {
      const double mid = 0.5 * (lo + hi);
      (d1_distflow(mid) == Verdict::kConverged ? lo : hi) = mid;
    }
  }
  const double boundary = 0.5 * (lo + hi);
  const bool pass = at10 == Verdict::kConverged && at27 == Verdict::kOscillating && boundary >= 13.0 &&
                    boundary <= 52.0;
  return {pass, "DistFlow D1: alpha 10 " + std::string(to_string(at10)) + ", alpha 27 " +
                    std::string(to_string(at27)) + ", boundary ~" + fmt(boundary)};
}

Outcome criterion6() {
  std::vector<double> devs;
  std::string detail = "max|v*-v_nom|:";
  for (double alpha : {1.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0}) {
    const Scenario s = sce(alpha);
    const auto eq = solve_equilibrium(s.problem);
    devs.push_back((eq.v - s.problem.v_nom).cwiseAbs().maxCoeff());
    detail += " " + fmt(devs.back());
  }
  bool monotone = true;
  for (std::size_t k = 1; k < devs.size(); ++k) monotone = monotone && devs[k] <= devs[k - 1];
  return {monotone && devs.back() < devs.front(), detail};
}

Outcome criterion7() {
  const Scenario s = sce(27.0);
  const ControlProblem& p = s.problem;
  const auto eq = solve_equilibrium(p);
  const Plant plant = Plant::linear(p);
  const Vector q0 = Vector::Zero(p.size());
  const double g3 = 0.9 * d3_stepsize_bound(p);
  const auto d3 = simulate(p, plant, {ControllerKind::kD3, 1e-3, g3}, q0, {.tol = 1e-12, .max_iter = 100000});
  const auto d2 = simulate(p, plant, {ControllerKind::kD2, 1e-3}, q0,
                           {.tol = 1e-12, .max_iter = 200000, .record_stride = 200000, .detect_oscillation = false,
                            .record_objective = false});
  const Vector v_d2 = p.x * d2.q_average + p.vtilde;
  const double e3 = (d3.v_final - eq.v).cwiseAbs().maxCoeff();
  const double e2 = (v_d2 - eq.v).cwiseAbs().maxCoeff();
  const bool pass = eq.fixed_point_residual < 1e-6 && d3.verdict == Verdict::kConverged && e3 < 1e-4 && e2 < 1e-4;
  return {pass, "residual " + fmt(eq.fixed_point_residual) + "; D3 (gamma3 " + fmt(g3) + ") " +
                    std::string(to_string(d3.verdict)) + ", |dv| " + fmt(e3) + "; D2 running average |dv| " +
                    fmt(e2)};
}

Outcome criterion8() {
  const Scenario s = sce(27.0);
  const ControlProblem& p = s.problem;
  const auto eq = solve_equilibrium(p, {.tol = 1e-14});
  const double g = estimate_gradient_bound(p, 42);
  bool all = true;
  std::string detail = "G " + fmt(g);
  for (double gamma : {1e-3, 1e-2}) {
    const auto traj = simulate(p, Plant::linear(p), {ControllerKind::kD2, gamma}, Vector::Zero(p.size()),
                               {.tol = 0.0, .max_iter = 200000, .record_stride = 200000,
                                .detect_oscillation = false});
    const auto stated = d2_regret_bound_check(traj, eq, gamma, g, RegretBound::kAsStated);
    const auto standard = d2_regret_bound_check(traj, eq, gamma, g, RegretBound::kStandard);
    all = all && stated.holds;
    detail += "; gamma2 " + fmt(gamma) + ": stated bound violated at " + std::to_string(stated.violations) + "/" +
              std::to_string(stated.checked) + " t (first t=" + std::to_string(stated.first_violation) +
              "), ||q1-q*||^2/(2 gamma t) + gamma G^2/2 violated at " + std::to_string(standard.violations);
  }
  return {all, detail};
}

Outcome criterion9() {
  const ControlProblem p = scalar_problem(0.5, 1.05, ControlCurve::droop(3.0, 0.0));
  const SimulationOptions o{.tol = 1e-10, .max_iter = 10000};
  const auto a = simulate(p, Plant::linear(p), {ControllerKind::kD3, 1e-3, 0.79}, Vector::Zero(1), o);
  const auto b = simulate(p, Plant::linear(p), {ControllerKind::kD3, 1e-3, 0.81}, Vector::Zero(1), o);
  const double bound = d3_stepsize_bound(p);
  return {a.verdict == Verdict::kConverged && b.verdict != Verdict::kConverged && std::abs(bound - 0.8) < 1e-12,
          "bound " + fmt(bound) + "; gamma3 0.79 " + std::string(to_string(a.verdict)) + ", 0.81 " +
              std::string(to_string(b.verdict))};
}

Outcome criterion10() {
  RunSpec spec;
  spec.alpha = 27.0;
  const Feeder base = load_feeder(spec.feeder, spec.ingest);
  const double delta = spec.deadband;
  const auto kink = tune_kink(spec, base, 2, -delta / 2 + 1e-3, 5.0);
  const Scenario s = make_scenario(kink.feeder, spec);
  const ControlProblem& p = s.problem;
  const Plant plant = Plant::linear(p);
  const Vector q0 = Vector::Zero(p.size());
  const SimulationOptions o{.tol = 1e-6, .max_iter = 10000, .detect_oscillation = false};
  const auto d2 = simulate(p, plant, {ControllerKind::kD2, 1.0}, q0, o);
  const auto d3 = simulate(p, plant, {ControllerKind::kD3, 1e-3, 0.9 * d3_stepsize_bound(p)}, q0, o);
  const double dv = (d2.v_final - d3.v_final).cwiseAbs().maxCoeff();
  const bool pass = std::abs(kink.q_star) < 1e-3 && d2.verdict != Verdict::kConverged &&
                    d3.verdict == Verdict::kConverged && dv < 1e-3;
  return {pass, "bus 2 PV " + fmt(kink.pv_output) + " p.u., q*_2 " + fmt(kink.q_star) + "; D2 " +
                    std::string(to_string(d2.verdict)) + " (last residual " + fmt(d2.residuals.back()) + "), D3 " +
                    std::string(to_string(d3.verdict)) + " in " + std::to_string(d3.steps) + " steps; |dv| " +
                    fmt(dv)};
}

nlohmann::json linearization_report() {
  const Feeder f = load_feeder(std::string(kBuiltinSce42));
  const auto m = sensitivity_matrices(f);
  const Vector q = Vector::Zero(f.size());
  const auto lin = linear_voltage(f, m, q);
  const auto full = distflow_sweep(f, q, {.tol = 1e-12});
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < f.size(); ++i) {
    rows.push_back({{"bus", f.bus(i).id}, {"v_linear", lin.v(i)}, {"v_distflow", full.v(i)},
                    {"error", full.v(i) - lin.v(i)}});
  }
  return {{"feeder", "builtin:sce42"},
          {"feeder_hash", feeder_hash(f)},
          {"load_scale", 1.0},
          {"power_factor", 0.9},
          {"q", "zero"},
          {"max_abs_error", (full.v - lin.v).cwiseAbs().maxCoeff()},
          {"buses", rows}};
}

Outcome criterion11() {
  const nlohmann::json now = linearization_report();
  std::ifstream in(golden_path());
  if (!in) return {false, "golden file missing: " + golden_path()};
  const nlohmann::json golden = nlohmann::json::parse(in);
  double drift = std::abs(golden["max_abs_error"].get<double>() - now["max_abs_error"].get<double>());
  for (std::size_t k = 0; k < now["buses"].size(); ++k) {
    drift = std::max(drift, std::abs(golden["buses"][k]["v_distflow"].get<double>() -
                                     now["buses"][k]["v_distflow"].get<double>()));
  }
  const double max_err = now["max_abs_error"].get<double>();
  return {max_err <= 0.02 && drift < 1e-9 && golden["feeder_hash"] == now["feeder_hash"],
          "max |v_lin - v_distflow| " + fmt(max_err) + " p.u., drift vs golden " + fmt(drift)};
}

const std::vector<std::pair<std::string, std::function<Outcome()>>>& criteria() {
  static const std::vector<std::pair<std::string, std::function<Outcome()>>> list{
      {"positive definite R and X on random trees", criterion1},
      {"explicit X inverse", criterion2},
      {"Lipschitz bound of the control map", criterion3},
      {"D1 contraction at M = 0.9", criterion4},
      {"D1 boundary on the DistFlow plant", criterion5},
      {"equilibrium deviation non-increasing in alpha", criterion6},
      {"D1/D2/D3 share the equilibrium at alpha = 27", criterion7},
      {"D2 running-average bound as stated", criterion8},
      {"D3 stepsize bound on the scalar case", criterion9},
      {"D2 orbits the kink, D3 converges", criterion10},
      {"linearization error at peak load", criterion11},
  };
  return list;
}

bool report(int number, const std::string& name, const Outcome& o, double secs) {
  std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << number << ": " << name << " | " << o.detail << " ["
            << fmt(secs) << " s]" << std::endl;
  return o.pass;
}

bool run_one(int number) {
  const auto& [name, fn] = criteria()[static_cast<std::size_t>(number - 1)];
  const auto start = Clock::now();
  Outcome o;
  try {
    o = fn();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  return report(number, name, o, std::chrono::duration<double>(Clock::now() - start).count());
}

/// Runs 1-11 and returns the outcome of criterion 12 (wall time).
bool run_suite(bool& all_pass) {
  const auto start = Clock::now();
  all_pass = true;
  for (int k = 1; k <= 11; ++k) all_pass = run_one(k) && all_pass;
  const double secs = std::chrono::duration<double>(Clock::now() - start).count();
  return report(12, "criteria 1-11 finish within 5 minutes", {secs < 300.0, "wall time " + fmt(secs) + " s"}, secs);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 2 && std::strcmp(argv[1], "--write-golden") == 0) {
    std::ofstream(golden_path()) << linearization_report().dump(2) << "\n";
    std::cout << "wrote " << golden_path() << "\n";
    return 0;
  }
  if (argc == 3 && std::strcmp(argv[1], "--criterion") == 0) {
    const int n = std::atoi(argv[2]);
    if (n >= 1 && n <= 11) return run_one(n) ? 0 : 1;
    if (n == 12) {
      bool all = false;
      return run_suite(all) ? 0 : 1;
    }
    std::cerr << "criterion must be 1-12\n";
    return 1;
  }
  if (argc != 1) {
    std::cerr << "usage: " << argv[0] << " [--criterion N | --write-golden]\n";
    return 1;
  }
  bool all = false;
  const bool timely = run_suite(all);
  return all && timely ? 0 : 1;
}
