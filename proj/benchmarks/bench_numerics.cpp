#include <benchmark/benchmark.h>

#include "proxylab/numerics/gemm.hpp"
#include "proxylab/numerics/kmeans.hpp"
#include "proxylab/numerics/rng.hpp"
#include "proxylab/numerics/svd.hpp"
#include "proxylab/numerics/tensor.hpp"

namespace {

using namespace proxylab;

Tensor<double> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  auto m = Tensor<double>::matrix(r, c);
  for (auto& x : m.values()) x = rng.uniform() * 2 - 1;
  return m;
}

void BM_GemmNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<float> a(n * n, 0.5f), b(n * n, 0.25f), c(n * n);
  for (auto _ : state) {
    gemm::nt<float>(n, n, n, a.data(), n, b.data(), n, c.data(), n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_GemmNT)->Arg(32)->Arg(128)->Arg(512);

// typical per-head fit: stacked queries or keys, 512 x head_dim
void BM_Svd(benchmark::State& state) {
  const auto m = random_matrix(512, static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(svd(m));
}
BENCHMARK(BM_Svd)->Arg(32)->Arg(64);

void BM_KMeans(benchmark::State& state) {
  const auto m = random_matrix(4096, 32, 5);
  for (auto _ : state) benchmark::DoNotOptimize(kmeans(m, static_cast<std::size_t>(state.range(0)), 1));
}
BENCHMARK(BM_KMeans)->Arg(8)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
