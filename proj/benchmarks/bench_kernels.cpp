#include <benchmark/benchmark.h>

#include "plstm/backprop.hpp"
#include "plstm/model.hpp"
#include "plstm/rng.hpp"
#include "plstm/tensor.hpp"

using namespace plstm;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, SeededRng& rng) {
  Matrix m(r, c);
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
  return m;
}

// Training-shaped products: batch x hidden times hidden x (gates*hidden).
void BM_gemm_nn(benchmark::State& state) {
  const std::size_t B = 32, H = static_cast<std::size_t>(state.range(0));
  SeededRng rng(1);
  Matrix a = random_matrix(B, H, rng);
  Matrix b = random_matrix(H, 4 * H, rng);
  Matrix c(B, 4 * H);
  for (auto _ : state) {
    gemm_nn_acc(c, a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.counters["flops"] = benchmark::Counter(
      static_cast<double>(state.iterations()) * 2.0 * B * H * 4 * H,
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_gemm_nn)->Arg(64)->Arg(128)->Arg(256);

void BM_gemm_tn(benchmark::State& state) {
  const std::size_t B = 32, H = static_cast<std::size_t>(state.range(0));
  SeededRng rng(2);
  Matrix a = random_matrix(B, H, rng);
  Matrix b = random_matrix(B, 4 * H, rng);
  Matrix c(H, 4 * H);
  for (auto _ : state) {
    gemm_tn_acc(c, a, b);
    benchmark::DoNotOptimize(c.data.data());
  }
  state.counters["flops"] = benchmark::Counter(
      static_cast<double>(state.iterations()) * 2.0 * B * H * 4 * H,
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_gemm_tn)->Arg(64)->Arg(128)->Arg(256);

// One full training update (forward + backward) on a copy-task-shaped batch.
void BM_bptt_step(benchmark::State& state) {
  const std::size_t H = static_cast<std::size_t>(state.range(0));
  const std::size_t T = static_cast<std::size_t>(state.range(1));
  const std::size_t B = 32, F = 10, O = 9;
  SeededRng rng(3);
  ModelSpec spec;
  spec.kind = CellKind::plstm;
  spec.input = F;
  spec.hidden = H;
  spec.outputs = O;
  Model model = build_model(spec, rng);

  SequenceBatch batch;
  batch.batch = B;
  batch.steps = T;
  batch.features = F;
  batch.classes = O;
  batch.x.assign(T, Matrix(B, F));
  batch.targets.assign(T, std::vector<int>(B, 0));
  batch.mask.assign(T, std::vector<std::uint8_t>(B, 1));
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b)
      batch.x[t](b, rng.integer(F)) = 1.0;

  for (auto _ : state) {
    BpttResult res = run_bptt(model, batch);
    benchmark::DoNotOptimize(res.objective);
  }
  state.counters["steps"] = benchmark::Counter(
      static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_bptt_step)->Args({64, 120})->Args({128, 120})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
