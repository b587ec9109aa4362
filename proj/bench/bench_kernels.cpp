// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dearfed/kernels.hpp"

namespace {

std::vector<double> random_vec(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1), b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      dearfed::kernels::gemm(a.data(), b.data(), c.data(), n, n, n, false);
    } else {
      dearfed::kernels::gemm_reference(a.data(), b.data(), c.data(), n, n, n, false);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}

template <bool Parallel>
void BM_WeightedSum(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  constexpr std::size_t k = 10;
  std::vector<std::vector<double>> models;
  std::vector<const double*> rows;
  for (std::size_t i = 0; i < k; ++i) models.push_back(random_vec(d, 10 + static_cast<unsigned>(i)));
  for (const auto& m : models) rows.push_back(m.data());
  const std::vector<double> w(k, 1.0 / k);
  std::vector<double> out(d);
  for (auto _ : state) {
    if constexpr (Parallel) {
      dearfed::kernels::weighted_sum(w, rows, out);
    } else {
      dearfed::kernels::weighted_sum_reference(w, rows, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(k * d * sizeof(double)));
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(32)->Arg(128)->Arg(256);
BENCHMARK(BM_WeightedSum<false>)->Arg(4897)->Arg(1 << 20);
BENCHMARK(BM_WeightedSum<true>)->Arg(4897)->Arg(1 << 20);

BENCHMARK_MAIN();
