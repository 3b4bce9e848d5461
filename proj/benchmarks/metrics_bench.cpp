#include <random>

#include <benchmark/benchmark.h>

#include "mpr/metrics.hpp"

namespace {

mpr::metrics::TokenSeq random_tokens(std::mt19937_64& gen, std::size_t len, int vocab) {
  std::uniform_int_distribution<int> pick(0, vocab - 1);
  mpr::metrics::TokenSeq out;
  for (std::size_t i = 0; i < len; ++i) out.push_back("w" + std::to_string(pick(gen)));
  return out;
}

struct Pair {
  mpr::metrics::TokenSeq cand, ref;
};

Pair make_pair_of(std::size_t len) {
  std::mt19937_64 gen(len);
  return {random_tokens(gen, len, 50), random_tokens(gen, len + len / 5, 50)};
}

void BM_Bleu(benchmark::State& state) {
  const auto p = make_pair_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mpr::metrics::bleu(p.cand, {p.ref}, 4, mpr::metrics::Smoothing::kAddOne));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Bleu)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_RougeL(benchmark::State& state) {
  const auto p = make_pair_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mpr::metrics::rouge_l(p.cand, p.ref));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_RougeL)->RangeMultiplier(4)->Range(16, 4096)->Complexity();

void BM_Meteor(benchmark::State& state) {
  const auto p = make_pair_of(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mpr::metrics::meteor(p.cand, p.ref, true));
}
BENCHMARK(BM_Meteor)->RangeMultiplier(4)->Range(16, 1024);

void BM_Tokenize(benchmark::State& state) {
  const std::string text =
      "What is the difference between a Vision Transformer (ViT) and a convolutional network, e.g. ResNet-50? ";
  std::string big;
  for (int i = 0; i < state.range(0); ++i) big += text;
  for (auto _ : state) benchmark::DoNotOptimize(mpr::metrics::tokenize(big));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * static_cast<int64_t>(big.size()));
}
BENCHMARK(BM_Tokenize)->Arg(1)->Arg(64);

}  // namespace
