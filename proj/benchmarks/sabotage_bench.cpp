#include <benchmark/benchmark.h>

#include "mpr/sabotage.hpp"

namespace {

const std::string kText =
    "What is the difference between a GAN model and a VAE when training on small image datasets with BERT features?";

mpr::sabotage::SabotageConfig config() {
  mpr::sabotage::SabotageConfig cfg;
  cfg.seed = 42;
  cfg.term_lexicon = mpr::sabotage::default_lexicon();
  return cfg;
}

void BM_Sabotage(benchmark::State& state) {
  const auto stage = static_cast<mpr::SabotageStage>(state.range(0));
  auto cfg = config();
  for (auto _ : state) {
    ++cfg.seed;
    benchmark::DoNotOptimize(mpr::sabotage::sabotage(kText, stage, cfg));
  }
}
BENCHMARK(BM_Sabotage)->DenseRange(1, 3)->ArgName("stage");

void BM_ApplyEdits(benchmark::State& state) {
  const auto r = mpr::sabotage::sabotage(kText, mpr::SabotageStage::kStage3, config());
  for (auto _ : state) benchmark::DoNotOptimize(mpr::sabotage::apply_edits(r.original, r.edits));
}
BENCHMARK(BM_ApplyEdits);

}  // namespace
BENCHMARK_MAIN();
