// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "conad/kernels.hpp"
#include "conad/scoring.hpp"

namespace {

std::vector<double> random_values(std::size_t n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * n * n));
}

template <auto Kernel>
void bm_matmul_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_values(n * n, 1), b = random_values(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
}

template <auto Kernel>
void bm_pairwise(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 16;
  const auto x = random_values(n * d, 3);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    Kernel(x, out, n, d);
    benchmark::DoNotOptimize(out.data());
  }
}

void bm_lof(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  conad::Tensor pts(conad::Shape{n, 2}, random_values(n * 2, 4));
  for (auto _ : state) benchmark::DoNotOptimize(conad::lof_scores(pts, 20));
}

}  // namespace

BENCHMARK(bm_matmul<conad::kernels::matmul_serial>)->Arg(64)->Arg(256);
BENCHMARK(bm_matmul<conad::kernels::matmul>)->Arg(64)->Arg(256);
BENCHMARK(bm_matmul_tn<conad::kernels::matmul_tn_acc_serial>)->Arg(64)->Arg(256);
BENCHMARK(bm_matmul_tn<conad::kernels::matmul_tn_acc>)->Arg(64)->Arg(256);
BENCHMARK(bm_pairwise<conad::kernels::pairwise_distances_serial>)->Arg(256)->Arg(1024);
BENCHMARK(bm_pairwise<conad::kernels::pairwise_distances>)->Arg(256)->Arg(1024);
BENCHMARK(bm_lof)->Arg(1000);

BENCHMARK_MAIN();
