#pragma once

#include <string_view>

#include "voltvar/linalg.hpp"
#include "voltvar/network.hpp"

namespace voltvar {

enum class PlantKind { kLinear, kDistFlow };

std::string_view to_string(PlantKind kind);
PlantKind plant_kind_from_string(std::string_view name);

/// Bus voltages and line flows. Line quantities are indexed by the receiving
/// bus, matching Feeder::line().
struct VoltageSolution {
  Vector v;
  Vector p_flow;
  Vector q_flow;
  Vector ell;
  PlantKind model = PlantKind::kLinear;
  int iterations = 0;
};

/// v = X q + vtilde, with lossless flows accumulated over descendant sets.
VoltageSolution linear_voltage(const Feeder& feeder, const SensitivityMatrices& mats, const Vector& q);

struct DistFlowOptions {
  double tol = 1e-8;
  int max_iter = 100;
  /// When false the r*ell and x*ell terms are dropped (lossless recursion).
  bool include_losses = true;
};

/// Backward/forward sweep on the full branch-flow equations with reactive
/// generation q at every non-slack bus. Starts flat (v = v0, ell = 0) and
/// stops once the max voltage change between sweeps drops below tol.
///
/// The returned point satisfies the power balances exactly and the current
/// relation ell * v_i^2 = P^2 + Q^2 to within the sweep tolerance.
/// Errors: kNoConvergence, kNegativeSquaredVoltage, kDimensionMismatch.
VoltageSolution distflow_sweep(const Feeder& feeder, const Vector& q, const DistFlowOptions& options = {});

struct LinearizationError {
  /// v_distflow - v_linear per bus.
  Vector error;
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

LinearizationError linearization_error(const Feeder& feeder, const SensitivityMatrices& mats, const Vector& q,
                                       const DistFlowOptions& options = {});

}  // namespace voltvar
