#include "autov/bench.hpp"

#include <algorithm>
#include <numeric>

#include "autov/error.hpp"

namespace autov {

namespace {

constexpr std::uint64_t kInteractionStream = 7;
constexpr std::uint64_t kRandomStrategyStream = 11;

void say(const BenchLog& log, const std::string& msg) {
  if (log) log(msg);
}

std::vector<CandidateGroup> kept_groups(const BenchConfig& cfg, const std::vector<CandidateGroup>& groups) {
  if (!cfg.filter_train) return groups;
  const FilterResult f = filter_groups(groups, cfg.filter);
  std::vector<CandidateGroup> kept;
  kept.reserve(f.kept.size());
  for (std::size_t i : f.kept) kept.push_back(groups[i]);
  return kept;
}

}  // namespace

InteractionWeights synthetic_interaction_weights(std::uint64_t seed, std::size_t model_dim, std::size_t heads,
                                                 std::size_t ff_dim) {
  Rng rng = Rng(seed).split(kInteractionStream);
  return seed_interaction_weights(rng, model_dim, heads, ff_dim);
}

const StrategyResult& BenchRun::result(std::string_view strategy) const {
  for (const auto& r : results)
    if (r.strategy == strategy) return r;
  throw StateError("no result for strategy '" + std::string(strategy) + "'");
}

BenchRun run_strategy_comparison(const BenchConfig& cfg, std::uint64_t seed, const BenchLog& log,
                                 const RankerParams* pairwise) {
  SyntheticConfig scfg = cfg.synthetic;
  scfg.seed = seed;
  TrainConfig tcfg = cfg.train;
  tcfg.seed = seed;

  say(log, "seed " + std::to_string(seed) + ": generating benchmark");
  const SyntheticBenchmark bench = generate_synthetic(scfg);
  auto w = std::make_shared<const InteractionWeights>(
      synthetic_interaction_weights(seed, scfg.model_dim, cfg.interaction_heads, cfg.interaction_ff_dim));

  const std::vector<CandidateGroup> train_groups = kept_groups(cfg, bench.train.data.groups);
  const std::vector<CandidateGroup>& test_groups = bench.test.data.groups;
  say(log, "seed " + std::to_string(seed) + ": " + std::to_string(train_groups.size()) + " training groups kept");
  const auto enc_train = encode_groups(train_groups, *w, cfg.aggregation, cfg.threads);
  const auto enc_test = encode_groups(test_groups, *w, cfg.aggregation, cfg.threads);

  BenchRun run;
  run.seed = seed;
  run.train_groups_kept = train_groups.size();

  RankerParams pairwise_params;
  if (pairwise != nullptr) {
    pairwise_params = *pairwise;
  } else {
    say(log, "seed " + std::to_string(seed) + ": training pairwise ranker");
    const auto pairs = expand_all_pairs(train_groups);
    TrainingState state = init_training(tcfg, scfg.model_dim);
    TrainOptions opts;
    opts.threads = cfg.threads;
    train_epochs(state, pairs, enc_train, tcfg.epochs, opts);
    pairwise_params = state.params;
  }

  std::vector<std::unique_ptr<Selector>> selectors;
  selectors.push_back(strategy_oracle());
  selectors.push_back(strategy_fixed(cfg.fixed_slot));
  selectors.push_back(strategy_random(Rng(seed).split(kRandomStrategyStream).next_u64()));
  if (cfg.train_baselines) {
    say(log, "seed " + std::to_string(seed) + ": training regression baseline");
    selectors.push_back(strategy_regression(train_regression(train_groups, enc_train, tcfg, cfg.threads)));
    say(log, "seed " + std::to_string(seed) + ": training gate baseline");
    selectors.push_back(strategy_gate(train_gate(train_groups, enc_train, tcfg, 1.0, 0.1, cfg.threads)));
    say(log, "seed " + std::to_string(seed) + ": training list-wise baseline");
    selectors.push_back(strategy_listwise(train_listwise(train_groups, enc_train, tcfg, cfg.threads)));
  }
  selectors.push_back(strategy_pairwise(pairwise_params));
  RetrievalConfig rcfg = cfg.retrieval;
  rcfg.prefilter_enabled = true;
  rcfg.aggregation = cfg.aggregation;
  selectors.push_back(strategy_retrieval(pairwise_params, w, rcfg));

  for (const auto& s : selectors) run.results.push_back(evaluate(*s, test_groups, enc_test, cfg.threads));
  return run;
}

std::vector<SweepRow> pool_size_sweep(const BenchConfig& cfg, std::uint64_t seed, const BenchLog& log) {
  if (cfg.sweep_sizes.empty()) throw ValidationError("pool-size sweep needs at least one size");
  for (std::size_t n : cfg.sweep_sizes) {
    if (n < 1 || n > 16) throw ValidationError("pool sizes must be in [1, 16]");
  }
  SyntheticConfig scfg = cfg.synthetic;
  scfg.seed = seed;
  scfg.pool_size = *std::max_element(cfg.sweep_sizes.begin(), cfg.sweep_sizes.end());
  TrainConfig tcfg = cfg.train;
  tcfg.seed = seed;

  say(log, "sweep: generating nested pools of size " + std::to_string(scfg.pool_size));
  const SyntheticBenchmark bench = generate_synthetic(scfg);
  const InteractionWeights w =
      synthetic_interaction_weights(seed, scfg.model_dim, cfg.interaction_heads, cfg.interaction_ff_dim);
  const auto random = strategy_random(Rng(seed).split(kRandomStrategyStream).next_u64());

  std::vector<SweepRow> rows;
  for (std::size_t n : cfg.sweep_sizes) {
    const auto test = truncate_pools(bench.test.data.groups, n);
    SweepRow row;
    row.pool_size = n;
    row.groups = test.size();
    double oracle = 0.0;
    for (const auto& g : test) {
      const auto l = true_losses(g);
      oracle += *std::min_element(l.begin(), l.end());
    }
    row.oracle_loss = test.empty() ? 0.0 : oracle / static_cast<double>(test.size());
    if (n == 1) {
      row.agreement = 1.0;
      row.regret = 0.0;
      row.random_agreement = 1.0;
      rows.push_back(row);
      continue;
    }
    say(log, "sweep: training pairwise ranker for n = " + std::to_string(n));
    const auto train = kept_groups(cfg, truncate_pools(bench.train.data.groups, n));
    const auto enc_train = encode_groups(train, w, cfg.aggregation, cfg.threads);
    const auto enc_test = encode_groups(test, w, cfg.aggregation, cfg.threads);
    const auto pairs = expand_all_pairs(train);
    TrainingState state = init_training(tcfg, scfg.model_dim);
    TrainOptions opts;
    opts.threads = cfg.threads;
    train_epochs(state, pairs, enc_train, tcfg.epochs, opts);
    const StrategyResult r = evaluate(*strategy_pairwise(state.params), test, enc_test, cfg.threads);
    row.agreement = r.agreement;
    row.regret = r.regret;
    row.random_agreement = evaluate(*random, test, {}, cfg.threads).agreement;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace autov
