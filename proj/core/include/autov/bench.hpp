#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string_view>
#include <vector>

#include "autov/evaluation.hpp"
#include "autov/interaction.hpp"
#include "autov/pipeline.hpp"
#include "autov/retrieval.hpp"
#include "autov/synthetic.hpp"
#include "autov/training.hpp"

namespace autov {

struct BenchConfig {
  SyntheticConfig synthetic;
  TrainConfig train;
  FilterConfig filter;
  bool filter_train = true;
  RetrievalConfig retrieval;
  TextAggregation aggregation = TextAggregation::mean;
  std::size_t interaction_heads = 4;
  std::size_t interaction_ff_dim = 256;
  std::size_t fixed_slot = 0;
  std::size_t runs = 1;  // seeds seed, seed + 1, ...
  std::vector<std::size_t> sweep_sizes = {1, 2, 4, 8};
  bool train_baselines = true;
  std::size_t threads = 0;
};

using BenchLog = std::function<void(std::string_view)>;

// Interaction weights for synthetic runs, derived from the global seed.
InteractionWeights synthetic_interaction_weights(std::uint64_t seed, std::size_t model_dim, std::size_t heads,
                                                 std::size_t ff_dim);

struct BenchRun {
  std::uint64_t seed = 0;
  std::size_t train_groups_kept = 0;
  std::vector<StrategyResult> results;  // oracle, fixed, random, regression, gate, listwise, pairwise, pairwise+prefilter

  const StrategyResult& result(std::string_view strategy) const;
};

// Generates a benchmark for `seed`, trains every learned strategy on the
// (optionally filtered) training split and evaluates all of them on the
// test split. When `pairwise` is given it replaces the trained pairwise ranker.
BenchRun run_strategy_comparison(const BenchConfig& cfg, std::uint64_t seed, const BenchLog& log = {},
                                 const RankerParams* pairwise = nullptr);

struct SweepRow {
  std::size_t pool_size = 0;
  std::size_t groups = 0;
  double agreement = 0.0;
  double regret = 0.0;
  double oracle_loss = 0.0;  // mean best true loss in the pool
  double random_agreement = 0.0;
};

// Trains and evaluates the pairwise strategy on nested pools (the first n
// candidates of groups generated with the largest n).
std::vector<SweepRow> pool_size_sweep(const BenchConfig& cfg, std::uint64_t seed, const BenchLog& log = {});

}  // namespace autov
