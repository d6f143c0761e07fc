#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "autov/error.hpp"
#include "autov/pipeline.hpp"
#include "oracles.hpp"

using namespace autov;

namespace {

// rank[i] from a comparison sort over (loss, index).
std::vector<std::size_t> sort_oracle(const std::vector<double>& losses) {
  std::vector<std::size_t> idx(losses.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return losses[a] != losses[b] ? losses[a] < losses[b] : a < b;
  });
  std::vector<std::size_t> rank(losses.size());
  for (std::size_t pos = 0; pos < idx.size(); ++pos) rank[idx[pos]] = pos;
  return rank;
}

std::vector<double> random_losses(Rng& rng, std::size_t n) {
  std::vector<double> l(n);
  for (double& v : l) v = rng.uniform(0.0, 3.0);
  return l;
}

}  // namespace

TEST(RankGroup, ForcedOrdering) {
  Rng rng(1);
  EXPECT_EQ(rank_group(oracle::make_group(rng, {0.5, 1.2, 0.9})).rank, (std::vector<std::size_t>{0, 2, 1}));
  EXPECT_EQ(rank_group(oracle::make_group(rng, {1.0, 1.0})).rank, (std::vector<std::size_t>{0, 1}));
  const auto q = rank_group(oracle::make_group(rng, {0.5, 1.2, 0.9}));
  EXPECT_EQ(q.order(), (std::vector<std::size_t>{0, 2, 1}));
}

TEST(RankGroup, AgreesWithSortOracle) {
  Rng rng(2);
  for (int g = 0; g < 500; ++g) {
    const std::size_t n = 2 + rng.below(15);
    auto losses = random_losses(rng, n);
    if (g % 5 == 0) losses[n - 1] = losses[0];  // exercise ties
    EXPECT_EQ(rank_group(oracle::make_group(rng, losses)).rank, sort_oracle(losses));
  }
}

TEST(RankGroup, PermutationConsistent) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto losses = random_losses(rng, 6);
    const auto perm = rng.permutation(6);
    std::vector<double> permuted(6);
    for (std::size_t i = 0; i < 6; ++i) permuted[i] = losses[perm[i]];
    const auto base = rank_group(oracle::make_group(rng, losses)).rank;
    const auto pr = rank_group(oracle::make_group(rng, permuted)).rank;
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(pr[i], base[perm[i]]);
  }
}

TEST(RankGroup, MissingLossIsIncomplete) {
  Rng rng(4);
  auto g = oracle::make_group(rng, {0.1, 0.2});
  g.candidates[1].loss.reset();
  EXPECT_THROW(rank_group(g), IncompleteGroupError);
}

TEST(Filter, ZeroVarianceDropped) {
  Rng rng(5);
  const std::vector<CandidateGroup> gs = {oracle::make_group(rng, {2.0, 2.0, 2.0, 2.0})};
  const auto r = filter_groups(gs, FilterConfig{});
  ASSERT_EQ(r.dropped.size(), 1u);
  EXPECT_EQ(r.dropped[0].reason, DropReason::low_variance);
  EXPECT_EQ(drop_reason_name(DropReason::low_variance), "low_variance");
}

TEST(Filter, HighMeanOutlierDropped) {
  Rng rng(6);
  std::vector<CandidateGroup> gs;
  std::vector<double> means;
  for (int i = 0; i < 40; ++i) {
    const double base = 0.5 + 0.01 * i;
    gs.push_back(oracle::make_group(rng, {base, base + 0.4, base + 0.8}));
    means.push_back(base + 0.4);
  }
  gs.push_back(oracle::make_group(rng, {9.0, 9.4, 9.8}));
  means.push_back(9.4);
  // Sort-based quantile oracle at 0.95.
  std::sort(means.begin(), means.end());
  const double pos = 0.95 * static_cast<double>(means.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const double threshold = means[lo] + (pos - static_cast<double>(lo)) * (means[lo + 1] - means[lo]);
  const auto r = filter_groups(gs, FilterConfig{});
  EXPECT_NEAR(r.mean_threshold, threshold, 1e-12);
  std::size_t outliers = 0;
  bool last_dropped = false;
  for (const auto& d : r.dropped) {
    EXPECT_EQ(d.reason, DropReason::high_mean_loss);
    outliers += d.loss_mean > threshold;
    last_dropped |= d.index == 40;
  }
  EXPECT_TRUE(last_dropped);
  EXPECT_EQ(outliers, r.dropped.size());
}

TEST(Filter, SpreadGroupKeptWithDefaults) {
  Rng rng(7);
  const std::vector<double> l = {0.1, 0.9, 1.7};
  double mean = 0.0, ss = 0.0;
  for (double v : l) mean += v / 3.0;
  for (double v : l) ss += (v - mean) * (v - mean);
  ASSERT_GT(std::sqrt(ss / 3.0), FilterConfig{}.min_loss_std);
  const std::vector<CandidateGroup> gs = {oracle::make_group(rng, l)};
  const auto r = filter_groups(gs, FilterConfig{});
  EXPECT_EQ(r.kept, (std::vector<std::size_t>{0}));
  EXPECT_TRUE(filter_groups(std::span<const CandidateGroup>{}, FilterConfig{}).kept.empty());
}

TEST(Filter, PartitionsAndIsIdempotent) {
  Rng rng(8);
  std::vector<CandidateGroup> gs;
  for (int i = 0; i < 200; ++i) {
    auto l = random_losses(rng, 4);
    if (i % 7 == 0) l = {1.0, 1.01, 1.0, 1.02};
    gs.push_back(oracle::make_group(rng, l));
  }
  const FilterConfig cfg;
  const auto r = filter_groups(gs, cfg);
  std::set<std::size_t> seen(r.kept.begin(), r.kept.end());
  for (const auto& d : r.dropped) EXPECT_TRUE(seen.insert(d.index).second);
  EXPECT_EQ(seen.size(), gs.size());
  EXPECT_TRUE(std::is_sorted(r.kept.begin(), r.kept.end()));

  std::vector<CandidateGroup> kept;
  for (auto i : r.kept) kept.push_back(gs[i]);
  const auto again = filter_groups(kept, cfg, r.mean_threshold);
  EXPECT_TRUE(again.dropped.empty());
  EXPECT_EQ(again.kept.size(), kept.size());
}

TEST(Filter, RejectsBadConfig) {
  Rng rng(9);
  const std::vector<CandidateGroup> gs = {oracle::make_group(rng, {0.1, 1.0})};
  EXPECT_THROW(filter_groups(gs, FilterConfig{-1.0, 0.95}), ValidationError);
  EXPECT_THROW(filter_groups(gs, FilterConfig{0.05, 0.0}), ValidationError);
  EXPECT_THROW(filter_groups(gs, FilterConfig{0.05, 1.5}), ValidationError);
}

TEST(Pairs, Counts) {
  Rng rng(10);
  EXPECT_EQ(expand_pairs(rank_group(oracle::make_group(rng, random_losses(rng, 6)))).size(), 15u);
  for (std::size_t n = 2; n <= 16; ++n)
    EXPECT_EQ(expand_pairs(rank_group(oracle::make_group(rng, random_losses(rng, n)))).size(), n * (n - 1) / 2);
  const auto two = expand_pairs(rank_group(oracle::make_group(rng, {3.0, 1.0})));
  ASSERT_EQ(two.size(), 1u);
  EXPECT_EQ(two[0].chosen, 1u);
  EXPECT_EQ(two[0].rejected, 0u);
  Quadruple single;
  single.rank = {0};
  single.losses = {1.0};
  EXPECT_THROW(expand_pairs(single), DegenerateGroupError);
}

TEST(Pairs, MatchDoubleLoopOracle) {
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    auto losses = random_losses(rng, 4);
    if (trial % 4 == 0) losses[3] = losses[1];
    const auto pairs = expand_pairs(rank_group(oracle::make_group(rng, losses)));
    std::set<std::pair<std::size_t, std::size_t>> got, want;
    for (const auto& p : pairs) {
      got.insert({p.chosen, p.rejected});
      EXPECT_LE(losses[p.chosen], losses[p.rejected]);
    }
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = i + 1; j < 4; ++j)
        want.insert(losses[j] < losses[i] ? std::pair{j, i} : std::pair{i, j});
    EXPECT_EQ(got, want);
  }
}

TEST(Pairs, FileRoundTrip) {
  oracle::TempDir dir("pairs");
  Rng rng(12);
  std::vector<CandidateGroup> gs;
  for (int i = 0; i < 5; ++i)
    gs.push_back(oracle::make_group(rng, random_losses(rng, 4), 4, 2, 2, "grp" + std::to_string(i)));
  const auto pairs = expand_all_pairs(gs);
  EXPECT_EQ(pairs.size(), 30u);
  write_pairs(dir / "pairs.tsv", pairs, gs);
  EXPECT_EQ(read_pairs(dir / "pairs.tsv", gs), pairs);
  EXPECT_THROW(read_pairs(dir / "none.tsv", gs), PathError);
}
