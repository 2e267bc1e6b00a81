// Serial reference kernels against their OpenMP counterparts on random unit
// rows. Arguments: rows per side, dimension.
#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "cwi/kernels.hpp"
#include "cwi/random.hpp"

namespace {

using cwi::kernels::MatrixView;

std::vector<float> unit_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  cwi::Rng rng(seed);
  std::vector<float> m(rows * dim);
  for (std::size_t r = 0; r < rows; ++r) {
    double norm = 0;
    for (std::size_t c = 0; c < dim; ++c) {
      const double v = cwi::uniform_real(rng, -1.0, 1.0);
      m[r * dim + c] = static_cast<float>(v);
      norm += v * v;
    }
    for (std::size_t c = 0; c < dim; ++c) m[r * dim + c] /= static_cast<float>(std::sqrt(norm));
  }
  return m;
}

struct Inputs {
  std::vector<float> queries, base;
  std::vector<double> query_penalty, base_penalty;
  MatrixView q, b;
};

Inputs make_inputs(const benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  Inputs in;
  in.queries = unit_rows(n, d, 1);
  in.base = unit_rows(n, d, 2);
  in.query_penalty.assign(n, 0.1);
  in.base_penalty.assign(n, 0.2);
  in.q = {in.queries.data(), n, d};
  in.b = {in.base.data(), n, d};
  return in;
}

void BM_TopkMeanSerial(benchmark::State& state) {
  const Inputs in = make_inputs(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cwi::kernels::serial::topk_mean_similarity(in.q, in.b, 10));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_TopkMeanOmp(benchmark::State& state) {
  const Inputs in = make_inputs(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(cwi::kernels::omp::topk_mean_similarity(in.q, in.b, 10));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_CslsTopkSerial(benchmark::State& state) {
  const Inputs in = make_inputs(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        cwi::kernels::serial::csls_topk(in.q, in.b, in.query_penalty, in.base_penalty, 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

void BM_CslsTopkOmp(benchmark::State& state) {
  const Inputs in = make_inputs(state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        cwi::kernels::omp::csls_topk(in.q, in.b, in.query_penalty, in.base_penalty, 1));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * state.range(0));
}

#define CWI_SIZES ->Args({1000, 300})->Args({5000, 300})->Unit(benchmark::kMillisecond)->UseRealTime()

BENCHMARK(BM_TopkMeanSerial) CWI_SIZES;
BENCHMARK(BM_TopkMeanOmp) CWI_SIZES;
BENCHMARK(BM_CslsTopkSerial) CWI_SIZES;
BENCHMARK(BM_CslsTopkOmp) CWI_SIZES;

}  // namespace

BENCHMARK_MAIN();
