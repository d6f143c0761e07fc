#include <benchmark/benchmark.h>

#include "autov/interaction.hpp"
#include "autov/pipeline.hpp"
#include "autov/ranker.hpp"
#include "autov/synthetic.hpp"
#include "autov/training.hpp"

using namespace autov;

namespace {

TokenMatrix random_tokens(Rng& rng, std::size_t rows, std::size_t cols) {
  TokenMatrix m(rows, cols);
  for (float& v : m.data()) v = static_cast<float>(rng.normal());
  return m;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto a = random_tokens(rng, n, n);
  const auto b = random_tokens(rng, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(16)->Arg(64)->Arg(256);

void BM_Interact(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const auto w = seed_interaction_weights(rng, d, 4, 4 * d);
  const auto visual = random_tokens(rng, 8, d);
  const auto query = random_tokens(rng, 4, d);
  for (auto _ : state) benchmark::DoNotOptimize(interact(w, visual, query));
}
BENCHMARK(BM_Interact)->Arg(64)->Arg(256);

void BM_ScorePairBackward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  const auto p = RankerParams::initialize(rng, d, 16, RankerConfig{});
  const auto vc = random_tokens(rng, 8, d);
  const auto vr = random_tokens(rng, 8, d);
  const auto t = random_tokens(rng, 4, d);
  for (auto _ : state) {
    const auto a = score_features(p, vc, t);
    const auto b = score_features(p, vr, t);
    benchmark::DoNotOptimize(backward(p, a.tape, b.tape));
  }
}
BENCHMARK(BM_ScorePairBackward)->Arg(64)->Arg(512);

void BM_TrainEpoch(benchmark::State& state) {
  SyntheticConfig syn;
  syn.train_groups = 200;
  syn.test_groups = 1;
  const auto bench = generate_synthetic(syn);
  Rng rng(4);
  const auto w = seed_interaction_weights(rng, syn.model_dim, 4, 256);
  const auto& groups = bench.train.data.groups;
  const auto encoded = encode_groups(groups, w, TextAggregation::mean);
  const auto pairs = expand_all_pairs(groups);
  TrainConfig cfg;
  for (auto _ : state) {
    auto s = init_training(cfg, syn.model_dim);
    train_epochs(s, pairs, encoded, 1);
    benchmark::DoNotOptimize(s.params);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
