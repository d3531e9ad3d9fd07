#include <benchmark/benchmark.h>

#include "tenshape/energy.hpp"
#include "tenshape/estimator.hpp"
#include "tenshape/synth.hpp"

namespace {

using namespace tenshape;

const synth::SyntheticScenario& tm40() {
  static const auto sc = synth::make_tm40_like(5, 4, {0.33, 0.39}, {.active_stiffness = 0.5});
  return sc;
}

void BM_Step(benchmark::State& state, Schedule schedule) {
  const auto& sc = tm40();
  const ConnectivityMatrix c = build_connectivity(sc.spec);
  const auto phi = synth::inclinations_of(sc.truth_pose);
  EstimatorConfig cfg;
  const auto r = synth::recommended_rates(sc.spec, phi, schedule);
  cfg.position_rate = r.position;
  cfg.yaw_rate = r.yaw;
  cfg.schedule = schedule;
  Estimator est(sc.spec, c, cfg, initialize_pose(sc.spec, cfg, phi));
  for (auto _ : state) benchmark::DoNotOptimize(est.step());
}
BENCHMARK_CAPTURE(BM_Step, per_strut, Schedule::kPerStrut);
BENCHMARK_CAPTURE(BM_Step, full_batch, Schedule::kFullBatch);

void BM_Gradients(benchmark::State& state) {
  const auto& sc = tm40();
  const ConnectivityMatrix c = build_connectivity(sc.spec);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_gradients(sc.spec, c, sc.truth_pose));
}
BENCHMARK(BM_Gradients);

void BM_Energy(benchmark::State& state) {
  const auto& sc = tm40();
  const ConnectivityMatrix c = build_connectivity(sc.spec);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_energy(sc.spec, c, sc.truth_pose).total);
}
BENCHMARK(BM_Energy);

}  // namespace

BENCHMARK_MAIN();
