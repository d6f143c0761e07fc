#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "autov/bench.hpp"
#include "autov/error.hpp"
#include "autov/report.hpp"

using namespace autov;

namespace {

BenchConfig tiny_bench() {
  BenchConfig cfg;
  cfg.synthetic.model_dim = 16;
  cfg.synthetic.latent_dim = 4;
  cfg.synthetic.h_true = 2;
  cfg.synthetic.visual_tokens = 3;
  cfg.synthetic.text_tokens = 2;
  cfg.synthetic.train_groups = 60;
  cfg.synthetic.test_groups = 40;
  cfg.interaction_ff_dim = 32;
  cfg.train.hidden_dim = 4;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 16;
  cfg.sweep_sizes = {1, 2, 4};
  return cfg;
}

StrategyResult result(const std::string& name, double agreement, double regret, std::vector<std::size_t> hist) {
  StrategyResult r;
  r.strategy = name;
  r.groups = 10;
  r.agreement = agreement;
  r.regret = regret;
  r.histogram = std::move(hist);
  return r;
}

}  // namespace

TEST(Report, SummaryAveragesRunsAndSumsHistograms) {
  std::vector<BenchRun> runs(2);
  runs[0].results = {result("pairwise", 0.8, 0.02, {6, 4})};
  runs[1].results = {result("pairwise", 0.6, 0.04, {5, 5})};
  const auto s = summarize_runs(runs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_NEAR(s[0].agreement, 0.7, 1e-12);
  EXPECT_NEAR(s[0].regret, 0.03, 1e-12);
  EXPECT_NEAR(s[0].regret_std, std::sqrt(2.0 * 0.01 * 0.01), 1e-12);
  EXPECT_EQ(s[0].histogram, (std::vector<std::size_t>{11, 9}));
  EXPECT_EQ(regrets_of(runs, "pairwise"), (std::vector<double>{0.02, 0.04}));
  EXPECT_THROW(runs[0].result("listwise"), StateError);
  EXPECT_EQ(fixed6(0.5), "0.500000");

  std::ostringstream table;
  const std::vector<std::string> header = {"seed 1"};
  write_strategy_table(table, s, header);
  EXPECT_NE(table.str().find("# seed 1"), std::string::npos);
  EXPECT_NE(table.str().find("pairwise\t2\t10\t0.700000"), std::string::npos) << table.str();
}

TEST(Report, TTestBlockFlagsStatedMeanDiscrepancy) {
  TTestReport r;
  r.differences = {2.4, 2.4, 2.6, 2.5, 2.4};
  r.mean_difference = 2.46;
  r.std_difference = 0.0894;
  r.degrees_of_freedom = 4;
  r.p_value = 1e-6;
  EXPECT_TRUE(mean_discrepancy(r, 2.06));
  EXPECT_FALSE(mean_discrepancy(r, 2.46));
  std::ostringstream out;
  write_ttest_report(out, "reference", r, 2.06);
  EXPECT_NE(out.str().find("[reference]"), std::string::npos);
  EXPECT_NE(out.str().find("discrepancy"), std::string::npos);
  EXPECT_NE(out.str().find("significant_at_0.05 yes"), std::string::npos) << out.str();
  std::ostringstream clean;
  write_ttest_report(clean, "reference", r, 2.46);
  EXPECT_EQ(clean.str().find("discrepancy"), std::string::npos);
}

TEST(Bench, ComparisonRunsEveryStrategy) {
  const auto cfg = tiny_bench();
  const auto run = run_strategy_comparison(cfg, 4);
  for (const char* name : {"oracle", "random", "regression", "gate", "listwise", "pairwise", "pairwise+prefilter"}) {
    const auto& r = run.result(name);
    EXPECT_EQ(r.groups, 40u) << name;
    EXPECT_GE(r.regret, 0.0) << name;
    EXPECT_LE(r.agreement, 1.0) << name;
  }
  EXPECT_DOUBLE_EQ(run.result("oracle").agreement, 1.0);
  const auto again = run_strategy_comparison(cfg, 4);
  EXPECT_EQ(again.result("pairwise").histogram, run.result("pairwise").histogram);
  EXPECT_EQ(again.result("pairwise").regret, run.result("pairwise").regret);
}

TEST(Bench, SweepShape) {
  const auto rows = pool_size_sweep(tiny_bench(), 5);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].pool_size, 1u);
  EXPECT_DOUBLE_EQ(rows[0].agreement, 1.0);
  EXPECT_DOUBLE_EQ(rows[0].regret, 0.0);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_GT(rows[i].pool_size, rows[i - 1].pool_size);
    EXPECT_LE(rows[i].oracle_loss, rows[i - 1].oracle_loss + 1e-12);
    EXPECT_EQ(rows[i].groups, rows[0].groups);
  }
  auto bad = tiny_bench();
  bad.sweep_sizes = {0, 17};
  EXPECT_THROW(pool_size_sweep(bad, 5), Error);
}
