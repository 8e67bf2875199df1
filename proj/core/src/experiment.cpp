#include "voltvar/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "voltvar/error.hpp"

namespace voltvar {
namespace {

double max_deviation(const Vector& v, const Vector& v_nom) { return (v - v_nom).cwiseAbs().maxCoeff(); }

ControlCurve default_curve(const RunSpec& spec) { return ControlCurve::droop(spec.alpha, spec.deadband); }

}  // namespace

void RunSpec::validate() const {
  if (!(std::isfinite(alpha) && alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be positive");
  if (!(std::isfinite(deadband) && deadband >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "deadband must be non-negative");
  }
  if (!(simulation.tol > 0.0)) throw Error(ErrorCode::kInvalidArgument, "tol must be positive");
  if (simulation.max_iter < 0) throw Error(ErrorCode::kInvalidArgument, "max-iter must be non-negative");
  ingest.validate();
  controller.validate();
}

Plant Scenario::plant(PlantKind kind, const DistFlowOptions& options) const {
  return kind == PlantKind::kLinear ? Plant::linear(problem) : Plant::distflow(feeder, options);
}

Scenario make_scenario(const Feeder& feeder, const RunSpec& spec) {
  SensitivityMatrices mats = sensitivity_matrices(feeder);
  ControlProblem problem = make_problem(feeder, mats, default_curve(spec), spec.override_curves);
  return Scenario{feeder, std::move(mats), std::move(problem)};
}

Scenario make_scenario(const RunSpec& spec) {
  spec.validate();
  return make_scenario(load_feeder(spec.feeder, spec.ingest), spec);
}

std::string format_double(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const auto n = trajectory.q_final.size();
  out << "t";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",q_" << i;
  for (Eigen::Index i = 1; i <= n; ++i) out << ",v_" << i;
  out << ",residual,F\n";
  for (const TrajectoryState& s : trajectory.states) {
    out << s.t;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(s.q(i));
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << format_double(s.v(i));
    out << ',';
    if (static_cast<std::size_t>(s.t) < trajectory.residuals.size()) {
      out << format_double(trajectory.residuals[static_cast<std::size_t>(s.t)]);
    }
    out << ',';
    if (static_cast<std::size_t>(s.t) < trajectory.objective.size()) {
      out << format_double(trajectory.objective[static_cast<std::size_t>(s.t)]);
    }
    out << '\n';
  }
}

std::string run_metadata_json(const RunSpec& spec, const Scenario& scenario, const Trajectory& trajectory) {
  const Feeder& f = scenario.feeder;
  nlohmann::json bus_ids = nlohmann::json::array();
  for (const BusRecord& b : f.buses()) bus_ids.push_back(b.id);
  nlohmann::json meta{
      {"feeder", spec.feeder},
      {"feeder_hash", feeder_hash(f)},
      {"bus_ids", bus_ids},
      {"controller", to_string(spec.controller.kind)},
      {"alpha", spec.alpha},
      {"deadband", spec.deadband},
      {"gamma2", spec.controller.gamma2},
      {"gamma3", spec.controller.gamma3},
      {"plant", to_string(spec.plant)},
      {"load_scale", spec.ingest.load_scale},
      {"power_factor", spec.ingest.power_factor},
      {"pv_output", spec.ingest.pv_output},
      {"inverter_oversize", spec.ingest.inverter_oversize},
      {"tolerances",
       {{"residual", spec.simulation.tol},
        {"max_iter", spec.simulation.max_iter},
        {"distflow_tol", spec.distflow.tol},
        {"distflow_max_iter", spec.distflow.max_iter}}},
      {"bases", {{"v_kv", f.bases().v_kv}, {"s_kva", f.bases().s_kva}, {"z_ohm", f.bases().z_ohm}}},
      {"units", "p.u."},
      {"verdict", to_string(trajectory.verdict)},
      {"steps", trajectory.steps},
      {"seed", spec.seed},
  };
  if (spec.plant == PlantKind::kDistFlow) {
    meta["note"] =
        "AC plant is the DistFlow branch-flow model solved by backward/forward sweep, used in place of a "
        "MATPOWER AC power flow";
  }
  return meta.dump(2);
}

std::string_view to_string(SweepParameter p) {
  switch (p) {
    case SweepParameter::kAlpha: return "alpha";
    case SweepParameter::kGamma2: return "gamma2";
    case SweepParameter::kGamma3: return "gamma3";
    case SweepParameter::kLoadScale: return "load_scale";
  }
  return "?";
}

SweepParameter sweep_parameter_from_string(std::string_view name) {
  if (name == "alpha") return SweepParameter::kAlpha;
  if (name == "gamma2") return SweepParameter::kGamma2;
  if (name == "gamma3") return SweepParameter::kGamma3;
  if (name == "load_scale" || name == "load-scale") return SweepParameter::kLoadScale;
  throw Error(ErrorCode::kInvalidArgument, "unknown sweep parameter '" + std::string(name) + "'");
}

std::vector<SweepRow> run_sweep(const RunSpec& spec, SweepParameter parameter, const std::vector<double>& grid,
                                unsigned threads) {
  if (grid.empty()) throw Error(ErrorCode::kInvalidArgument, "sweep grid is empty");
  spec.validate();
  // Loading happens once; only load-scale sweeps need per-point feeders.
  const Feeder base = load_feeder(spec.feeder, spec.ingest);

  std::vector<SweepRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());
  auto run_point = [&](std::size_t k) {
    RunSpec local = spec;
    const double value = grid[k];
    Feeder feeder = base;
    switch (parameter) {
      case SweepParameter::kAlpha: local.alpha = value; break;
      case SweepParameter::kGamma2: local.controller.gamma2 = value; break;
      case SweepParameter::kGamma3: local.controller.gamma3 = value; break;
      case SweepParameter::kLoadScale:
        if (!(value >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "load scale must be >= 0");
        feeder = base.with_load_scale(value / spec.ingest.load_scale);
        local.ingest.load_scale = value;
        break;
    }
    local.validate();
    const Scenario sc = make_scenario(feeder, local);
    SweepRow row;
    row.index = static_cast<int>(k);
    row.value = value;
    const EquilibriumReport eq = solve_equilibrium(sc.problem);
    row.equilibrium_max_deviation = max_deviation(eq.v, sc.problem.v_nom);
    row.sigma = check_d1_condition(sc.problem).sigma;
    row.gamma3_bound = d3_stepsize_bound(sc.problem);
    SimulationOptions sim = local.simulation;
    sim.record_stride = std::max(1, sim.max_iter);
    sim.record_objective = false;
    const Trajectory traj = simulate(sc.problem, sc.plant(local.plant, local.distflow), local.controller,
                                     Vector::Zero(sc.problem.size()), sim);
    row.verdict = traj.verdict;
    row.steps = traj.steps;
    row.final_max_deviation = max_deviation(traj.v_final, sc.problem.v_nom);
    rows[k] = row;
  };

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < grid.size(); k = next++) {
      try {
        run_point(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  unsigned n_threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(grid.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

void write_sweep_csv(std::ostream& out, SweepParameter parameter, const std::vector<SweepRow>& rows) {
  out << "index," << to_string(parameter)
      << ",equilibrium_max_dev,sigma_max_ax,gamma3_bound,verdict,steps,final_max_dev\n";
  for (const SweepRow& r : rows) {
    out << r.index << ',' << format_double(r.value) << ',' << format_double(r.equilibrium_max_deviation) << ','
        << format_double(r.sigma) << ',' << format_double(r.gamma3_bound) << ',' << to_string(r.verdict) << ','
        << r.steps << ',' << format_double(r.final_max_deviation) << '\n';
  }
}

Feeder with_pv_output(const Feeder& feeder, int bus_id, double p, double oversize) {
  const int idx = feeder.index_of(bus_id);
  std::vector<BusRecord> buses{feeder.slack()};
  buses.insert(buses.end(), feeder.buses().begin(), feeder.buses().end());
  std::map<int, Inverter> inverters = feeder.inverters();
  auto it = inverters.find(bus_id);
  if (it == inverters.end()) throw Error(ErrorCode::kInvalidArgument, "bus " + std::to_string(bus_id) + " has no PV");
  BusRecord& b = buses[static_cast<std::size_t>(idx) + 1];
  b.p_g += p - it->second.p;
  it->second.p = p;
  it->second.s = std::max(it->second.s, oversize * p);
  return build_feeder(buses, feeder.lines(), inverters, feeder.bases(), feeder.slack_id(), feeder.v0());
}

KinkTuning tune_kink(const RunSpec& spec, const Feeder& feeder, int bus_id, double target_error, double p_max) {
  const int idx = feeder.index_of(bus_id);
  auto error_at = [&](double p, KinkTuning* out) {
    Feeder f = with_pv_output(feeder, bus_id, p, spec.ingest.inverter_oversize);
    const Scenario sc = make_scenario(f, spec);
    const EquilibriumReport eq = solve_equilibrium(sc.problem);
    const double e = eq.v(idx) - sc.problem.v_nom(idx);
    if (out != nullptr) *out = KinkTuning{std::move(f), p, e, eq.q(idx)};
    return e;
  };
  double lo = 0.0;
  double hi = p_max;
  if (!(error_at(lo, nullptr) <= target_error && error_at(hi, nullptr) >= target_error)) {
    throw Error(ErrorCode::kNoConvergence, "PV output range does not bracket the target voltage error");
  }
  for (int i = 0; i < 200 && hi - lo > 1e-13; ++i) {
    const double mid = 0.5 * (lo + hi);
    (error_at(mid, nullptr) < target_error ? lo : hi) = mid;
  }
  KinkTuning result{feeder, 0.0, 0.0, 0.0};
  error_at(0.5 * (lo + hi), &result);
  return result;
}

}  // namespace voltvar
