#include <benchmark/benchmark.h>

#include "setmpc/controllers.hpp"
#include "setmpc/simulator.hpp"

using namespace setmpc;

namespace {

LinearSystem double_integrator() {
  Matrix A(2, 2), B(2, 2);
  A << 1, 1, 0, 1;
  B << 0, 0.5, 1, 0.5;
  Vector xlo(2), xhi(2), ulo(2), uhi(2);
  xlo << -5, -1;
  xhi << 5, 1;
  ulo << -0.05, -0.05;
  uhi << 0.05, 0.05;
  return LinearSystem(A, B, Polytope::box(xlo, xhi), Polytope::box(ulo, uhi));
}

ControllerConfig layered_config() {
  ControllerConfig cfg;
  cfg.horizon = 3;
  cfg.Q = 0.5 * Matrix::Identity(2, 2);
  cfg.R = 2.0 * Matrix::Identity(2, 2);
  cfg.T = 100.0 * Matrix::Identity(2, 2);
  return cfg;
}

const SetLadder& shared_ladder() {
  static const SetLadder ladder = build_ladder(double_integrator(), 3, 50, 1e-6);
  return ladder;
}

}  // namespace

static void BM_SolveLp(benchmark::State& state) {
  const LinearSystem sys = double_integrator();
  Vector dir(2);
  dir << -1, -1;
  LpProblem lp = LpProblem::inequality_form(dir, sys.X.G(), sys.X.h());
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_lp(lp));
  }
}
BENCHMARK(BM_SolveLp);

static void BM_OneStepSet(benchmark::State& state) {
  const LinearSystem sys = double_integrator();
  const SetLadder& ladder = shared_ladder();
  const Polytope& rung = ladder.rungs[2];
  for (auto _ : state) {
    benchmark::DoNotOptimize(one_step_set(rung, sys.U, sys));
  }
}
BENCHMARK(BM_OneStepSet)->Unit(benchmark::kMillisecond);

static void BM_BuildLadder(benchmark::State& state) {
  const LinearSystem sys = double_integrator();
  for (auto _ : state) {
    benchmark::DoNotOptimize(build_ladder(sys, 3, 50, 1e-6));
  }
}
BENCHMARK(BM_BuildLadder)->Unit(benchmark::kMillisecond);

static void BM_RemoveRedundancy(benchmark::State& state) {
  const SetLadder& ladder = shared_ladder();
  const Polytope stacked = intersect(ladder.domain(), ladder.rungs[ladder.rungs.size() - 2]);
  for (auto _ : state) {
    benchmark::DoNotOptimize(remove_redundancy(stacked));
  }
}
BENCHMARK(BM_RemoveRedundancy);

static void BM_LayeredQpSolve(benchmark::State& state) {
  const SetLadder& ladder = shared_ladder();
  const ControllerConfig cfg = layered_config();
  Vector x(2), sp(2);
  x << -4.9, 0.96;
  sp << -4, 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kappa_mpc(x, sp, ladder, cfg));
  }
}
BENCHMARK(BM_LayeredQpSolve)->Unit(benchmark::kMicrosecond);

static void BM_TrackingQpSolve(benchmark::State& state) {
  const SetLadder& ladder = shared_ladder();
  ControllerConfig cfg = layered_config();
  cfg.flavor = ControllerFlavor::TrackingTerminalEquality;
  cfg.horizon = 18;
  Vector x(2), sp(2);
  x << 1.0, 0.1;
  sp << -4, 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(kappa_mpc(x, sp, ladder, cfg));
  }
}
BENCHMARK(BM_TrackingQpSolve)->Unit(benchmark::kMicrosecond);

static void BM_ClosedLoopScenario(benchmark::State& state) {
  const SetLadder& ladder = shared_ladder();
  const ControllerConfig cfg = layered_config();
  Scenario sc;
  sc.id = "bench";
  sc.x0 = Vector(2);
  sc.x0 << -4.9, 0.96;
  Vector sp(2);
  sp << -4, 0;
  sc.schedule = {{0, sp}};
  sc.t_sim = 50;
  for (auto _ : state) {
    Controller controller(ladder, cfg);
    benchmark::DoNotOptimize(simulate(sc, controller, AssertionPolicy::Off));
  }
}
BENCHMARK(BM_ClosedLoopScenario)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
