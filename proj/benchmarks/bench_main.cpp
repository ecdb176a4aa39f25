#include <benchmark/benchmark.h>

#include "sfopt/chain_oracle.hpp"
#include "sfopt/config.hpp"
#include "sfopt/environments.hpp"
#include "sfopt/estimators.hpp"
#include "sfopt/recursions.hpp"

namespace {

using namespace sfopt;

void BM_GradientSample(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(1);
  for (auto _ : state) {
    const auto p = sample_perturbation(rng, d);
    benchmark::DoNotOptimize(sf_gradient_sample(p, 0.1, 1.5));
  }
}
BENCHMARK(BM_GradientSample)->Arg(3)->Arg(33);

void BM_HessianSample(benchmark::State& state) {
  const int d = static_cast<int>(state.range(0));
  Rng rng(1);
  for (auto _ : state) {
    const auto p = sample_perturbation(rng, d);
    benchmark::DoNotOptimize(sf_hessian_sample(p, 0.1, 1.5));
  }
}
BENCHMARK(BM_HessianSample)->Arg(3)->Arg(33);

ExperimentConfig step_config(Algorithm algorithm, const EnvDescriptor& env) {
  ExperimentConfig c;
  c.algorithm = algorithm;
  c.beta = 0.1;
  c.schedule = {0.6, 0.45, 0.40, 0.1, 0.5, 0.05};
  c.horizon = 1;
  const int d = env_dim(env);
  c.box_lower = Vector::Constant(d, -5);
  c.box_upper = Vector::Constant(d, 5);
  c.env = env;
  return c;
}

void run_steps(benchmark::State& state, const ExperimentConfig& c) {
  auto env = make_env(c.env);
  auto s = initial_state(c, env->dim());
  auto streams = RunStreams::from_seed(c.seed);
  for (auto _ : state) s = algorithm_step(s, *env, c, streams);
}

void BM_Nsf1StepChain(benchmark::State& state) {
  run_steps(state, step_config(Algorithm::NSF1, ChainEnvSpec{}));
}
BENCHMARK(BM_Nsf1StepChain);

void BM_Gsf1StepChain(benchmark::State& state) {
  run_steps(state, step_config(Algorithm::GSF1, ChainEnvSpec{}));
}
BENCHMARK(BM_Gsf1StepChain);

void BM_Nsf1DiagStepMountainCar(benchmark::State& state) {
  run_steps(state, step_config(Algorithm::NSF1_DIAG, MountainCarSpec{}));
}
BENCHMARK(BM_Nsf1DiagStepMountainCar);

void BM_Nsf1StepMountainCar(benchmark::State& state) {
  run_steps(state, step_config(Algorithm::NSF1, MountainCarSpec{}));
}
BENCHMARK(BM_Nsf1StepMountainCar);

void BM_AnalyzeChain(benchmark::State& state) {
  ChainEnvSpec spec;
  spec.n_states = static_cast<int>(state.range(0));
  const auto model = SoftmaxChainModel::generate(spec);
  const Vector theta = Vector::Constant(spec.dim, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(analyze(model, theta));
}
BENCHMARK(BM_AnalyzeChain)->Arg(5)->Arg(20);

}  // namespace

BENCHMARK_MAIN();
