#include <benchmark/benchmark.h>

#include "bdflow/diagnostics.hpp"
#include "bdflow/dynamics.hpp"
#include "bdflow/meanfield.hpp"

using namespace bdflow;

namespace {

GaussianMixture mixture(std::size_t dim) {
  GaussianMixtureParams p;
  p.components = {{1.0, std::vector<double>(dim, -2.0), 0.4},
                  {-1.0, std::vector<double>(dim, 0.0), 0.4},
                  {1.0, std::vector<double>(dim, 2.0), 0.4}};
  p.bandwidth = 0.2;
  return GaussianMixture(p);
}

Ensemble mixture_ensemble(std::size_t n, std::size_t dim) {
  const auto amp = SamplerSpec::gaussian(0.0, 1.0);
  return Ensemble::from_sampler(SamplerSpec::uniform(std::vector<double>(dim, -3.0), std::vector<double>(dim, 3.0)),
                                n, dim, 1, &amp);
}

template <std::size_t dim>
void BM_MixtureEvaluate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto model = mixture(dim);
  const auto ens = mixture_ensemble(n, dim);
  std::vector<double> V(n), G(n * model.parameter_size());
  for (auto _ : state) {
    model.evaluate(ens, nullptr, V, G);
    benchmark::DoNotOptimize(V.data());
  }
  state.SetComplexityN(state.range(0));
}
// One-dimensional positions take a vectorized path.
BENCHMARK_TEMPLATE(BM_MixtureEvaluate, 1)->RangeMultiplier(4)->Range(100, 1600)->Complexity(benchmark::oNSquared);
BENCHMARK_TEMPLATE(BM_MixtureEvaluate, 2)->RangeMultiplier(4)->Range(100, 1600)->Complexity(benchmark::oNSquared);

void BM_GdStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto model = mixture(1);
  auto ens = mixture_ensemble(n, 1);
  for (auto _ : state) gd_step(model, ens, 1e-4);
}
BENCHMARK(BM_GdStep)->Arg(100)->Arg(1000);

void BM_BirthDeathStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto model = mixture(1);
  auto ens = mixture_ensemble(n, 1);
  DynamicsConfig cfg;
  cfg.dt = 1e-3;
  Rng rng(5);
  for (auto _ : state) birth_death_step(model, ens, cfg, rng);
}
BENCHMARK(BM_BirthDeathStep)->Arg(100)->Arg(1000);

void BM_RunStepReluTeacher(benchmark::State& state) {
  ReluStudentTeacher model({});
  const auto amp = SamplerSpec::point_mass(0.0);
  auto ens = Ensemble::from_sampler(SamplerSpec::gaussian(std::vector<double>(50, 0.0), std::vector<double>(50, 1.0)),
                                    50, 50, 1, &amp);
  DynamicsConfig cfg;
  cfg.dt = 0.1;
  cfg.alpha = 10.0;
  StepStreams streams = StepStreams::from_seed(1);
  for (auto _ : state) run_step(model, ens, cfg, streams);
}
BENCHMARK(BM_RunStepReluTeacher);

void BM_KmcQuadratic(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  QuadraticWell model({{0.0}, {1.0}});
  DynamicsConfig cfg;
  cfg.variant = Variant::KmcBd;
  for (auto _ : state) {
    state.PauseTiming();
    auto ens = Ensemble::from_sampler(SamplerSpec::gaussian(1.0, 1.0), n, 1, 3);
    Rng rng(9);
    state.ResumeTiming();
    benchmark::DoNotOptimize(kmc_run(model, ens, cfg, 0.5, rng));
  }
}
BENCHMARK(BM_KmcQuadratic)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_GridStep(benchmark::State& state) {
  const auto cells = static_cast<std::size_t>(state.range(0));
  const bool interacting = state.range(1) != 0;
  QuadraticWell well({{0.0}, {1.0}});
  GaussianMixtureParams p;
  p.components = {{1.0, {-1.0}, 0.5}, {1.0, {1.5}, 0.5}};
  p.bandwidth = 0.3;
  p.fixed_amplitude = 1.0;
  GaussianMixture mix(p);
  const PotentialModel& model = interacting ? static_cast<const PotentialModel&>(mix) : well;
  GridSolverConfig cfg;
  cfg.dt = 0.5 * (16.0 / static_cast<double>(cells)) / 8.0;
  GridSolver1D solver(model, initial_grid(SamplerSpec::gaussian(0.0, 1.0), -8.0, 8.0, cells), cfg);
  for (auto _ : state) solver.step();
}
BENCHMARK(BM_GridStep)->ArgsProduct({{1024, 4096}, {0, 1}});

}  // namespace

BENCHMARK_MAIN();
