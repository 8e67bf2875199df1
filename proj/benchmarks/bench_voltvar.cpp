#include <benchmark/benchmark.h>

#include <random>

#include "voltvar/dynamics.hpp"
#include "voltvar/experiment.hpp"
#include "voltvar/feeder_io.hpp"
#include "voltvar/powerflow.hpp"

using namespace voltvar;

namespace {

const Scenario& sce() {
  static const Scenario s = [] {
    RunSpec spec;
    spec.alpha = 10;
    return make_scenario(spec);
  }();
  return s;
}

void BM_SensitivityMatrices(benchmark::State& state) {
  const Feeder& f = sce().feeder;
  for (auto _ : state) benchmark::DoNotOptimize(sensitivity_matrices(f));
}
BENCHMARK(BM_SensitivityMatrices);

void BM_DistFlowSweep(benchmark::State& state) {
  const Feeder& f = sce().feeder;
  const Vector q = Vector::Zero(f.size());
  for (auto _ : state) benchmark::DoNotOptimize(distflow_sweep(f, q));
}
BENCHMARK(BM_DistFlowSweep);

void BM_StepD1(benchmark::State& state) {
  const auto& p = sce().problem;
  Vector q = Vector::Zero(p.size());
  for (auto _ : state) {
    const Vector v = p.x * q + p.vtilde;
    q = step_d1(p, v);
    benchmark::DoNotOptimize(q.data());
  }
}
BENCHMARK(BM_StepD1);

void BM_SimulateD1(benchmark::State& state) {
  const auto& p = sce().problem;
  const Plant plant = Plant::linear(p);
  const Vector q0 = Vector::Zero(p.size());
  for (auto _ : state) benchmark::DoNotOptimize(simulate(p, plant, {ControllerKind::kD1}, q0, {.tol = 1e-10}));
}
BENCHMARK(BM_SimulateD1);

void BM_SimulateD1DistFlow(benchmark::State& state) {
  const auto& s = sce();
  const Plant plant = s.plant(PlantKind::kDistFlow);
  const Vector q0 = Vector::Zero(s.problem.size());
  for (auto _ : state) benchmark::DoNotOptimize(simulate(s.problem, plant, {ControllerKind::kD1}, q0));
}
BENCHMARK(BM_SimulateD1DistFlow);

void BM_SolveEquilibrium(benchmark::State& state) {
  const auto& p = sce().problem;
  for (auto _ : state) benchmark::DoNotOptimize(solve_equilibrium(p));
}
BENCHMARK(BM_SolveEquilibrium);

}  // namespace

BENCHMARK_MAIN();
