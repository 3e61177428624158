#include <benchmark/benchmark.h>

#include "proxylab/dyck/dyck.hpp"
#include "proxylab/model/gradients.hpp"
#include "proxylab/model/parameters.hpp"
#include "proxylab/model/transformer.hpp"

namespace {

using namespace proxylab;

const dyck::DyckSpec kSpec{20, 10, 512};

void BM_SampleSentence(benchmark::State& state) {
  Rng rng(1);
  for (auto _ : state) benchmark::DoNotOptimize(dyck::sample_sentence(kSpec, rng));
}
BENCHMARK(BM_SampleSentence);

std::vector<std::vector<model::Token>> batch_of(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<model::Token>> out;
  while (out.size() < n) out.push_back(dyck::sample_sentence(kSpec, rng).tokens);
  return out;
}

void BM_Forward(benchmark::State& state) {
  const auto cfg = model::ModelConfig::dyck(kSpec.vocab_size(), kSpec.max_len);
  const auto params = model::init_model<float>(cfg, 1);
  const auto seq = batch_of(1, 2).front();
  for (auto _ : state) benchmark::DoNotOptimize(model::forward(params, std::span<const model::Token>(seq)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(seq.size()));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMicrosecond);

// one optimizer-free training step (forward + backward) at the given batch size
void BM_LossAndGradients(benchmark::State& state) {
  const auto cfg = model::ModelConfig::dyck(kSpec.vocab_size(), kSpec.max_len);
  const auto params = model::init_model<float>(cfg, 1);
  const auto seqs = batch_of(static_cast<std::size_t>(state.range(0)), 3);
  std::vector<std::span<const model::Token>> spans(seqs.begin(), seqs.end());
  std::int64_t tokens = 0;
  for (const auto& s : seqs) tokens += static_cast<std::int64_t>(s.size());
  for (auto _ : state) benchmark::DoNotOptimize(model::loss_and_gradients(params, std::span(spans)));
  state.SetItemsProcessed(state.iterations() * tokens);
}
BENCHMARK(BM_LossAndGradients)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace
