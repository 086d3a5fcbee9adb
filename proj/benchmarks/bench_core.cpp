#include <benchmark/benchmark.h>

#include <cmath>

#include "nscl/covariance.hpp"
#include "nscl/harness.hpp"
#include "nscl/null_space.hpp"
#include "nscl/rng.hpp"
#include "nscl/sym_eig.hpp"

using namespace nscl;

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

// Column scales decay so the spectrum resembles trained layer inputs.
Matrix covariance_of(std::size_t h) {
  Matrix x = gaussian(2 * h, h, 1);
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < h; ++c) x(r, c) *= std::pow(0.9, static_cast<double>(c));
  return accumulate_covariance(std::span(&x, 1)).cov;
}

void BM_SymEig(benchmark::State& state) {
  const Matrix cov = covariance_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sym_eig(cov));
}
BENCHMARK(BM_SymEig)->Arg(16)->Arg(33)->Arg(65)->Arg(145)->Unit(benchmark::kMillisecond);

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = gaussian(n, n, 2), b = gaussian(n, n, 3);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_ProjectUpdate(benchmark::State& state) {
  const auto h = static_cast<std::size_t>(state.range(0));
  const NullSpaceEntry e = compute_null_basis(covariance_of(h), 10.0);
  const Matrix g = gaussian(h, 64, 4);
  for (auto _ : state) benchmark::DoNotOptimize(project_update(e, g));
  state.counters["k"] = static_cast<double>(e.k());
}
BENCHMARK(BM_ProjectUpdate)->Arg(33)->Arg(65)->Arg(145);

void BM_AccumulateCovariance(benchmark::State& state) {
  const Matrix x = gaussian(static_cast<std::size_t>(state.range(0)), 65, 5);
  for (auto _ : state) benchmark::DoNotOptimize(accumulate_covariance(std::span(&x, 1)));
}
BENCHMARK(BM_AccumulateCovariance)->Arg(256)->Arg(1024);

void BM_DeskTaskEpoch(benchmark::State& state) {
  const auto tasks = make_gaussian_stream(desk_stream_config(1));
  TrainConfig c = desk_train_config(1);
  c.epochs = 1;
  c.record_steps = false;
  for (auto _ : state) {
    ContinualTrainer trainer(desk_mlp_spec(), c);
    benchmark::DoNotOptimize(trainer.train_task(tasks[0]));
  }
}
BENCHMARK(BM_DeskTaskEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
