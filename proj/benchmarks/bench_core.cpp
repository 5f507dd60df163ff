#include <benchmark/benchmark.h>

#include "stmpc/closedloop.hpp"
#include "stmpc/registry.hpp"
#include "stmpc/solver.hpp"

using namespace stmpc;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec vec1(double a) {
  Vec v(1);
  v << a;
  return v;
}

PlantModel di_plant() {
  PlantConfig pc;
  pc.x_ref = Vec::Zero(2);
  pc.u_ref = vec1(0);
  pc.input_lower = vec1(-2);
  pc.input_upper = vec1(2);
  pc.state_weights = vec2(100, 100);
  pc.input_weights = vec1(1);
  return make_plant("double_integrator", pc);
}

ResourceModel energy() {
  return make_resource_model(
      0.5, 0.5, ResourceCost::quadratic_energy(0.2449, -0.4848, 0.25, 0.01), 0.01,
      1.0);
}

OcpInstance instance(int horizon) {
  OcpInstance inst;
  inst.horizon = horizon;
  inst.plant = di_plant();
  inst.resource = energy();
  inst.initial_state = vec2(1, 0);
  inst.initial_resource = 0.5;
  inst.terminal_mode = TerminalMode::equality_to_reference;
  inst.integrator.h_max = 0.01;
  return inst;
}

}  // namespace

static void BM_Propagate(benchmark::State& state) {
  const PlantModel plant = di_plant();
  const IntegratorConfig cfg{0.01};
  const Vec x = vec2(1, 0), u = vec1(-2);
  const double dt = 1e-3 * state.range(0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(propagate(plant, x, u, dt, cfg));
  }
  state.counters["substeps"] = std::ceil(dt / cfg.h_max);
}
BENCHMARK(BM_Propagate)->Arg(100)->Arg(300)->Arg(1000);

static void BM_Rollout(benchmark::State& state) {
  const OcpInstance inst = instance(static_cast<int>(state.range(0)));
  DecisionVector d = reference_candidate(inst, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout(inst, d));
  }
}
BENCHMARK(BM_Rollout)->Arg(5)->Arg(20);

static void BM_Derivatives(benchmark::State& state) {
  const OcpInstance inst = instance(static_cast<int>(state.range(0)));
  DecisionVector d = reference_candidate(inst, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gradient(inst, d));
  }
}
BENCHMARK(BM_Derivatives)->Arg(5)->Arg(20);

static void BM_SolveCold(benchmark::State& state) {
  const OcpInstance inst = instance(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  cfg.stationarity_tol = 1e-3;
  cfg.inner_iters_max = 100;
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(inst, std::nullopt, cfg));
  }
}
BENCHMARK(BM_SolveCold)->Arg(5)->Unit(benchmark::kMillisecond);

static void BM_SolveWarm(benchmark::State& state) {
  const OcpInstance inst = instance(static_cast<int>(state.range(0)));
  SolverConfig cfg;
  cfg.stationarity_tol = 1e-3;
  cfg.inner_iters_max = 100;
  const SolveOutcome first = solve(inst, std::nullopt, cfg);
  const AssumptionReport rep = check_assumptions(inst.resource);
  const DecisionVector cand = shift_candidate(inst, first.solution, rep.recovery_interval);
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve(inst, cand, cfg));
  }
}
BENCHMARK(BM_SolveWarm)->Arg(5)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
