#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "voltvar/dynamics.hpp"
#include "voltvar/feeder_io.hpp"

namespace voltvar {

/// Everything needed to reproduce one run.
struct RunSpec {
  std::string feeder = std::string(kBuiltinSce42);
  IngestOptions ingest;
  ControllerConfig controller;
  PlantKind plant = PlantKind::kLinear;
  /// Homogeneous droop applied to every inverter (overrides file curves when
  /// override_curves is set or the inverter has none).
  double alpha = 10.0;
  double deadband = 0.04;
  bool override_curves = true;
  SimulationOptions simulation;
  DistFlowOptions distflow;
  std::uint64_t seed = 42;

  /// Throws Error(kInvalidArgument) for non-positive slopes and the like.
  void validate() const;
};

/// A loaded feeder with its linear model and control problem.
struct Scenario {
  Feeder feeder;
  SensitivityMatrices mats;
  ControlProblem problem;

  Plant plant(PlantKind kind, const DistFlowOptions& options = {}) const;
};

Scenario make_scenario(const RunSpec& spec);
Scenario make_scenario(const Feeder& feeder, const RunSpec& spec);

/// Trajectory CSV: header `t,q_1..q_n,v_1..v_n,residual,F`, one row per
/// recorded state. residual is ||q(t+1) - q(t)||_inf (empty on the last row).
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

/// JSON sidecar describing the run that produced a trajectory.
std::string run_metadata_json(const RunSpec& spec, const Scenario& scenario, const Trajectory& trajectory);

enum class SweepParameter { kAlpha, kGamma2, kGamma3, kLoadScale };
std::string_view to_string(SweepParameter p);
SweepParameter sweep_parameter_from_string(std::string_view name);

struct SweepRow {
  int index = 0;
  double value = 0.0;
  /// max_i |v*_i - v_nom,i| at the equilibrium of the linear model.
  double equilibrium_max_deviation = 0.0;
  double sigma = 0.0;
  double gamma3_bound = 0.0;
  Verdict verdict = Verdict::kMaxIterations;
  int steps = 0;
  /// max_i |v_i - v_nom,i| at the last simulated state.
  double final_max_deviation = 0.0;
};

/// Runs every grid point as an independent task on up to `threads` workers
/// (0 = hardware concurrency). Rows come back in grid order. The first error
/// (by grid index) is rethrown after all tasks finish.
std::vector<SweepRow> run_sweep(const RunSpec& spec, SweepParameter parameter, const std::vector<double>& grid,
                                unsigned threads = 0);

void write_sweep_csv(std::ostream& out, SweepParameter parameter, const std::vector<SweepRow>& rows);

/// Copy of `feeder` with the PV at `bus_id` producing `p` (p.u.); the bus's
/// p_g and the inverter's p change together, the inverter rating s grows if
/// needed to stay >= p * oversize.
Feeder with_pv_output(const Feeder& feeder, int bus_id, double p, double oversize);

struct KinkTuning {
  Feeder feeder;
  double pv_output = 0.0;
  /// v*_i - v_nom,i reached at the tuned bus.
  double voltage_error = 0.0;
  double q_star = 0.0;
};

/// Bisects the real PV output at `bus_id` (within [0, p_max]) until the
/// equilibrium voltage error there equals `target_error`. With a target just
/// inside the deadband the bus's equilibrium reactive power is exactly 0.
/// Errors: kNoConvergence when the target is not bracketed.
KinkTuning tune_kink(const RunSpec& spec, const Feeder& feeder, int bus_id, double target_error, double p_max);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace voltvar
