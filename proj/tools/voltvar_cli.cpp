// voltvar: command-line front end for local Volt/VAR control experiments.
//
// Exit codes: 0 success (or the checked condition holds), 1 runtime error,
// 2 condition fails or the dynamics did not converge.
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "voltvar/error.hpp"
#include "voltvar/experiment.hpp"

namespace {

using namespace voltvar;

constexpr int kOk = 0;
constexpr int kRuntimeError = 1;
constexpr int kConditionFails = 2;

struct CliOptions {
  RunSpec spec;
  std::string controller = "d1";
  std::string plant = "linear";
  std::string out;
  bool no_oscillation_detect = false;
  // sweep
  std::string parameter = "alpha";
  std::vector<double> grid;
  std::string range;
  unsigned threads = 0;
};

void add_common(CLI::App& cmd, CliOptions& o) {
  cmd.add_option("--feeder", o.spec.feeder, "Feeder JSON path or builtin:sce42")->capture_default_str();
  cmd.add_option("--controller", o.controller, "Controller: d1, d2 or d3")
      ->check(CLI::IsMember({"d1", "d2", "d3"}))
      ->capture_default_str();
  cmd.add_option("--plant", o.plant, "Plant model: linear or distflow")
      ->check(CLI::IsMember({"linear", "distflow"}))
      ->capture_default_str();
  cmd.add_option("--alpha", o.spec.alpha, "Droop slope applied to every inverter")->capture_default_str();
  cmd.add_option("--deadband", o.spec.deadband, "Full deadband width (p.u.)")->capture_default_str();
  cmd.add_option("--gamma2", o.spec.controller.gamma2, "D2 stepsize")->capture_default_str();
  cmd.add_option("--gamma3", o.spec.controller.gamma3, "D3 stepsize")->capture_default_str();
  cmd.add_option("--load-scale", o.spec.ingest.load_scale, "Multiplier on peak loads")->capture_default_str();
  cmd.add_option("--power-factor", o.spec.ingest.power_factor, "Load power factor for MVA entries")
      ->capture_default_str();
  cmd.add_option("--pv-output", o.spec.ingest.pv_output, "PV real output as a fraction of capacity")
      ->capture_default_str();
  cmd.add_option("--inverter-oversize", o.spec.ingest.inverter_oversize,
                 "Inverter apparent rating as a multiple of PV capacity")
      ->capture_default_str();
  cmd.add_option("--tol", o.spec.simulation.tol, "Convergence tolerance on ||q(t+1)-q(t)||_inf")
      ->capture_default_str();
  cmd.add_option("--max-iter", o.spec.simulation.max_iter, "Iteration cap")->capture_default_str();
  cmd.add_option("--seed", o.spec.seed, "Seed for sampled checks")->capture_default_str();
  cmd.add_option("--out", o.out, "Output path");
}

void finish_spec(CliOptions& o) {
  o.spec.controller.kind = controller_kind_from_string(o.controller);
  o.spec.plant = plant_kind_from_string(o.plant);
  o.spec.simulation.detect_oscillation = !o.no_oscillation_detect;
  o.spec.validate();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidArgument, "cannot write '" + path + "'");
  out << text;
}

int cmd_check(CliOptions& o) {
  finish_spec(o);
  const Scenario sc = make_scenario(o.spec);
  const D1ConditionReport r = check_d1_condition(sc.problem);
  std::cout << std::setprecision(6);
  std::cout << "buses               " << sc.problem.size() << " (controllable " << r.controllable << ")\n";
  std::cout << "sigma_max(AX)       " << r.sigma << (r.sufficient ? "  < 1 (D1 contraction holds)\n" : "  >= 1\n");
  std::cout << "corollary bound     " << r.corollary_value << (r.corollary ? "  < 1\n" : "  >= 1\n");
  std::cout << "holder bound        " << r.holder_bound << "\n";
  std::cout << "critical alpha      " << r.critical_alpha << "\n";
  std::cout << "lambda_max(AX)      " << lambda_max_ax(sc.problem) << "\n";
  std::cout << "gamma3_max          " << d3_stepsize_bound(sc.problem) << "\n";
  return r.sufficient ? kOk : kConditionFails;
}

int cmd_simulate(CliOptions& o) {
  finish_spec(o);
  const Scenario sc = make_scenario(o.spec);
  const Trajectory traj = simulate(sc.problem, sc.plant(o.spec.plant, o.spec.distflow), o.spec.controller,
                                   Vector::Zero(sc.problem.size()), o.spec.simulation);
  const std::string csv_path = o.out.empty() ? "trajectory.csv" : o.out;
  std::ostringstream csv;
  write_trajectory_csv(csv, traj);
  write_file(csv_path, csv.str());
  write_file(csv_path + ".json", run_metadata_json(o.spec, sc, traj));

  const double dev = (traj.v_final - sc.problem.v_nom).cwiseAbs().maxCoeff();
  std::cout << "verdict             " << to_string(traj.verdict) << "\n";
  std::cout << "steps               " << traj.steps << "\n";
  std::cout << "final residual      " << (traj.residuals.empty() ? 0.0 : traj.residuals.back()) << "\n";
  std::cout << "max |v - v_nom|     " << dev << "\n";
  std::cout << "trajectory          " << csv_path << "\n";
  return traj.verdict == Verdict::kConverged ? kOk : kConditionFails;
}

int cmd_equilibrium(CliOptions& o) {
  finish_spec(o);
  const Scenario sc = make_scenario(o.spec);
  EquilibriumOptions eo;
  eo.tol = std::min(o.spec.simulation.tol, 1e-10);
  const EquilibriumReport eq = solve_equilibrium(sc.problem, eo);
  std::ostringstream table;
  table << "bus,q,v\n";
  for (int i = 0; i < sc.problem.size(); ++i) {
    table << sc.feeder.bus(i).id << ',' << format_double(eq.q(i)) << ',' << format_double(eq.v(i)) << '\n';
  }
  if (o.out.empty()) {
    std::cout << table.str();
  } else {
    write_file(o.out, table.str());
  }
  std::cerr << std::setprecision(8) << "F = " << eq.objective.total << " (C " << eq.objective.cost << ", quad "
            << eq.objective.quadratic << ", lin " << eq.objective.linear << ")\n"
            << "fixed-point residual " << eq.fixed_point_residual << " after " << eq.iterations
            << " iterations (gamma3 " << eq.gamma3 << ")\n"
            << "max |v* - v_nom| " << (eq.v - sc.problem.v_nom).cwiseAbs().maxCoeff() << "\n";
  return kOk;
}

std::vector<double> expand_range(const std::string& range) {
  double a = 0, b = 0, step = 0;
  char c1 = 0, c2 = 0;
  std::istringstream in(range);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0) || b < a) {
    throw Error(ErrorCode::kInvalidArgument, "--range expects start:stop:step with step > 0");
  }
  std::vector<double> grid;
  for (long k = 0;; ++k) {
    const double v = a + static_cast<double>(k) * step;
    if (v > b + 1e-9 * step) break;
    grid.push_back(v);
  }
  return grid;
}

int cmd_sweep(CliOptions& o) {
  finish_spec(o);
  std::vector<double> grid = o.grid;
  if (!o.range.empty()) {
    const auto extra = expand_range(o.range);
    grid.insert(grid.end(), extra.begin(), extra.end());
  }
  const SweepParameter p = sweep_parameter_from_string(o.parameter);
  const auto rows = run_sweep(o.spec, p, grid, o.threads);
  std::ostringstream csv;
  write_sweep_csv(csv, p, rows);
  if (o.out.empty()) {
    std::cout << csv.str();
  } else {
    write_file(o.out, csv.str());
  }
  return kOk;
}

int cmd_export(CliOptions& o) {
  o.spec.ingest.validate();
  const std::string text = feeder_to_json(load_feeder(o.spec.feeder, o.spec.ingest)) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    write_file(o.out, text);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Local Volt/VAR control on radial distribution feeders"};
  app.require_subcommand(1);
  CliOptions o;

  auto* check = app.add_subcommand("check", "Report D1 contraction and D3 stepsize conditions");
  auto* sim = app.add_subcommand("simulate", "Run a controller against a plant and write the trajectory");
  auto* eq = app.add_subcommand("equilibrium", "Solve for the unique equilibrium");
  auto* sweep = app.add_subcommand("sweep", "Sweep one parameter over a grid (parallel)");
  auto* exp = app.add_subcommand("export-feeder", "Write a feeder as p.u. JSON");
  for (auto* cmd : {check, sim, eq, sweep, exp}) add_common(*cmd, o);
  sim->add_flag("--no-oscillation-detect", o.no_oscillation_detect, "Run to max-iter without the oscillation test");
  sim->add_option("--record-stride", o.spec.simulation.record_stride, "Record every k-th state");
  sweep->add_option("--parameter", o.parameter, "alpha, gamma2, gamma3 or load_scale")->capture_default_str();
  sweep->add_option("--grid", o.grid, "Grid values")->delimiter(',');
  sweep->add_option("--range", o.range, "Grid as start:stop:step");
  sweep->add_option("--threads", o.threads, "Worker threads (0 = all cores)");
  sweep->add_flag("--no-oscillation-detect", o.no_oscillation_detect, "Disable the oscillation test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kRuntimeError;
  }

  try {
    if (*check) return cmd_check(o);
    if (*sim) return cmd_simulate(o);
    if (*eq) return cmd_equilibrium(o);
    if (*sweep) return cmd_sweep(o);
    if (*exp) return cmd_export(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const bool no_convergence = e.code() == ErrorCode::kMaxIterations || e.code() == ErrorCode::kNoConvergence;
    return no_convergence ? kConditionFails : kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kRuntimeError;
}
