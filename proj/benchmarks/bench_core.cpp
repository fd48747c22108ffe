#include <benchmark/benchmark.h>

#include "edr/baselines.hpp"
#include "edr/density_ratio.hpp"
#include "edr/subspace_search.hpp"
#include "edr/synthetic.hpp"

using namespace edr;

namespace {

Matrix second_axis() {
  Matrix a = Matrix::Zero(synthetic::kExampleDimension, 1);
  a(1, 0) = 1.0;
  return a;
}

search::Hyper fixed_hyper() {
  search::Hyper h;
  h.sigma = 0.25;
  h.gamma = 0.1;
  h.c = 1e-3;
  h.lambda = 1e-4;
  return h;
}

}  // namespace

static void BM_UlsifFit(benchmark::State& state) {
  const auto d = synthetic::gen_example1(state.range(0), 1);
  const Matrix a = second_axis();
  const Matrix tr = d.x_train * a, te = d.x_test * a;
  for (auto _ : state) benchmark::DoNotOptimize(ratio::ulsif_fit(tr, te, 0.1, 0.25, ratio::kDefaultMaxCenters, 1));
}
BENCHMARK(BM_UlsifFit)->Arg(150)->Arg(500)->Arg(2000);

static void BM_TunedWeights(benchmark::State& state) {
  const auto d = synthetic::gen_example1(state.range(0), 2);
  const Matrix a = second_axis();
  const Matrix tr = d.x_train * a, te = d.x_test * a;
  for (auto _ : state) benchmark::DoNotOptimize(ratio::tuned_weights(tr, te, 5, 2));
}
BENCHMARK(BM_TunedWeights)->Arg(150)->Arg(500);

static void BM_EvaluateObjective(benchmark::State& state) {
  const auto d = synthetic::gen_example1(state.range(0), 3);
  const auto settings = search::make_objective_settings(d, model::LossSpec::regression(), 3);
  const auto a = search::Projection::from_matrix(second_axis());
  for (auto _ : state)
    benchmark::DoNotOptimize(search::evaluate_objective(a, d, fixed_hyper(), settings));
}
BENCHMARK(BM_EvaluateObjective)->Arg(150)->Arg(500);

static void BM_TotalGradient(benchmark::State& state) {
  const auto d = synthetic::gen_example1(state.range(0), 4);
  const auto settings = search::make_objective_settings(d, model::LossSpec::regression(), 4);
  const auto st = search::evaluate_objective(search::Projection::from_matrix(second_axis()), d,
                                             fixed_hyper(), settings);
  for (auto _ : state) benchmark::DoNotOptimize(search::total_gradient(st, d, settings));
}
BENCHMARK(BM_TotalGradient)->Arg(150)->Arg(500);

static void BM_Descend(benchmark::State& state) {
  const auto d = synthetic::gen_example1(150, 5);
  search::SearchConfig cfg;
  cfg.max_iters = 50;
  const auto settings = search::make_objective_settings(d, cfg.loss, 5);
  std::mt19937_64 rng(5);
  const Matrix a0 = linalg::random_stiefel(synthetic::kExampleDimension, 1, rng);
  for (auto _ : state) benchmark::DoNotOptimize(search::descend(d, cfg, settings, 1e-4, a0, 5));
}
BENCHMARK(BM_Descend)->Unit(benchmark::kMillisecond);

static void BM_Sir(benchmark::State& state) {
  const auto d = synthetic::gen_example1(state.range(0), 6);
  for (auto _ : state)
    benchmark::DoNotOptimize(baselines::sir_directions(d.x_train, d.y_train, 1, 10));
}
BENCHMARK(BM_Sir)->Arg(150)->Arg(2000);
BENCHMARK_MAIN();
