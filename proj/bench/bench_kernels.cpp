#include <benchmark/benchmark.h>

#include "danet/kernels.hpp"
#include "danet/numerics.hpp"

namespace {

danet::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  danet::Rng rng(seed);
  danet::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

template <bool Parallel>
void gemm_nt(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 64;
  const std::size_t p = 64;
  const danet::Matrix a = random_matrix(n, k, 1);
  const danet::Matrix b = random_matrix(p, k, 2);
  danet::Matrix c(n, p);
  for (auto _ : state) {
    if constexpr (Parallel) {
      danet::kernels::gemm_nt(a.values(), b.values(), c.values(), n, k, p);
    } else {
      danet::kernels::serial::gemm_nt(a.values(), b.values(), c.values(), n, k, p);
    }
    benchmark::DoNotOptimize(c.storage().data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * k * p));
}

template <bool Parallel>
void gemm_tn(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const std::size_t k = 64;
  const std::size_t p = 64;
  const danet::Matrix a = random_matrix(n, k, 3);
  const danet::Matrix b = random_matrix(n, p, 4);
  danet::Matrix c(k, p);
  for (auto _ : state) {
    if constexpr (Parallel) {
      danet::kernels::gemm_tn(a.values(), b.values(), c.values(), n, k, p);
    } else {
      danet::kernels::serial::gemm_tn(a.values(), b.values(), c.values(), n, k, p);
    }
    benchmark::DoNotOptimize(c.storage().data());
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * n * k * p));
}

}  // namespace

BENCHMARK(gemm_nt<false>)->Arg(256)->Arg(4096);
BENCHMARK(gemm_nt<true>)->Arg(256)->Arg(4096);
BENCHMARK(gemm_tn<false>)->Arg(256)->Arg(4096);
BENCHMARK(gemm_tn<true>)->Arg(256)->Arg(4096);

BENCHMARK_MAIN();
