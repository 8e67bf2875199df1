#include "voltvar/powerflow.hpp"

#include <cmath>
#include <string>

#include "voltvar/error.hpp"

namespace voltvar {

std::string_view to_string(PlantKind kind) {
  return kind == PlantKind::kLinear ? "linear" : "distflow";
}

PlantKind plant_kind_from_string(std::string_view name) {
  if (name == "linear") return PlantKind::kLinear;
  if (name == "distflow") return PlantKind::kDistFlow;
  throw Error(ErrorCode::kInvalidArgument, "unknown plant '" + std::string(name) + "'");
}

VoltageSolution linear_voltage(const Feeder& feeder, const SensitivityMatrices& mats, const Vector& q) {
  const int n = feeder.size();
  if (q.size() != n || mats.x.rows() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "linear_voltage: expected vectors of length " + std::to_string(n));
  }
  VoltageSolution sol;
  sol.model = PlantKind::kLinear;
  sol.v = mats.x * q + mats.vtilde;

  const Vector net_p = feeder.p_c() - feeder.p_g();
  const Vector net_q = feeder.q_c() - q;
  sol.p_flow = Vector::Zero(n);
  sol.q_flow = Vector::Zero(n);
  for (int j = 0; j < n; ++j) {
    for (int k : feeder.descendants(j)) {
      sol.p_flow(j) += net_p(k);
      sol.q_flow(j) += net_q(k);
    }
  }
  sol.ell = Vector::Zero(n);
  return sol;
}

VoltageSolution distflow_sweep(const Feeder& feeder, const Vector& q, const DistFlowOptions& options) {
  const int n = feeder.size();
  if (q.size() != n) throw Error(ErrorCode::kDimensionMismatch, "distflow_sweep: q has wrong length");

  const Vector net_p = feeder.p_c() - feeder.p_g();
  const Vector net_q = feeder.q_c() - q;
  const double w0 = feeder.v0() * feeder.v0();
  const auto& order = feeder.order();

  Vector w = Vector::Constant(n, w0);  // squared magnitudes
  Vector ell = Vector::Zero(n);
  Vector p_flow(n);
  Vector q_flow(n);
  Vector w_next(n);
  Vector v_prev = w.cwiseSqrt();

  for (int iter = 1; iter <= options.max_iter; ++iter) {
    // Backward sweep: leaves first.
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const int j = *it;
      double p = net_p(j);
      double qq = net_q(j);
      for (int k : feeder.children(j)) {
        p += p_flow(k);
        qq += q_flow(k);
      }
      if (options.include_losses) {
        p += feeder.line(j).r * ell(j);
        qq += feeder.line(j).x * ell(j);
      }
      p_flow(j) = p;
      q_flow(j) = qq;
    }
    // Forward sweep: parents first.
    for (int j : order) {
      const int parent = feeder.parent(j);
      const double w_up = parent == Feeder::kSlack ? w0 : w_next(parent);
      const LineRecord& l = feeder.line(j);
      double wj = w_up - 2.0 * (l.r * p_flow(j) + l.x * q_flow(j));
      if (options.include_losses) wj += (l.r * l.r + l.x * l.x) * ell(j);
      if (!(wj > 0.0)) {
        throw Error(ErrorCode::kNegativeSquaredVoltage,
                    "squared voltage at bus " + std::to_string(feeder.bus(j).id) + " is " + std::to_string(wj));
      }
      w_next(j) = wj;
    }
    const Vector v_now = w_next.cwiseSqrt();
    const double change = (v_now - v_prev).cwiseAbs().maxCoeff();

    // Keep the ell that produced these flows in the returned solution so that
    // the balance equations hold exactly at the reported point.
    Vector ell_next(n);
    for (int j = 0; j < n; ++j) {
      const int parent = feeder.parent(j);
      const double w_up = parent == Feeder::kSlack ? w0 : w_next(parent);
      ell_next(j) = options.include_losses ? (p_flow(j) * p_flow(j) + q_flow(j) * q_flow(j)) / w_up : 0.0;
    }

    if (change < options.tol) {
      VoltageSolution sol;
      sol.model = PlantKind::kDistFlow;
      sol.v = v_now;
      sol.p_flow = p_flow;
      sol.q_flow = q_flow;
      sol.ell = ell;
      sol.iterations = iter;
      return sol;
    }
    w = w_next;
    v_prev = v_now;
    ell = ell_next;
  }
  throw Error(ErrorCode::kNoConvergence,
              "DistFlow sweep did not converge in " + std::to_string(options.max_iter) + " iterations");
}

LinearizationError linearization_error(const Feeder& feeder, const SensitivityMatrices& mats, const Vector& q,
                                       const DistFlowOptions& options) {
  const VoltageSolution lin = linear_voltage(feeder, mats, q);
  const VoltageSolution full = distflow_sweep(feeder, q, options);
  LinearizationError out;
  out.error = full.v - lin.v;
  out.max_abs = out.error.cwiseAbs().maxCoeff();
  out.mean_abs = out.error.cwiseAbs().mean();
  return out;
}

}  // namespace voltvar
