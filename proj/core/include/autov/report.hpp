#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "autov/bench.hpp"
#include "autov/evaluation.hpp"
#include "autov/stats.hpp"

namespace autov {

// Mean over runs of one strategy's metrics; the histogram is summed.
struct StrategySummary {
  std::string strategy;
  std::size_t runs = 0;
  std::size_t groups = 0;  // per run
  double agreement = 0.0;
  double regret = 0.0;
  double regret_std = 0.0;  // across runs, sample std (0 for one run)
  double histogram_entropy = 0.0;
  std::vector<std::size_t> histogram;
};

std::vector<StrategySummary> summarize_runs(std::span<const BenchRun> runs);

// Per-run regrets of one strategy, in run order.
std::vector<double> regrets_of(std::span<const BenchRun> runs, const std::string& strategy);

std::string fixed6(double v);

// Tab-separated, one row per strategy. `header` lines are written as "# ..." comments.
void write_strategy_table(std::ostream& out, std::span<const StrategySummary> rows,
                          std::span<const std::string> header = {});
void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows, std::span<const std::string> header = {});

// One JSON object per line: a record per (seed, strategy) and per sweep row.
void write_records(std::ostream& out, std::span<const BenchRun> runs, std::span<const SweepRow> sweep,
                   std::uint64_t sweep_seed);

// Human-readable t-test block. When `stated_mean` is given and differs from the
// recomputed mean by more than 5e-3, a discrepancy line is added.
void write_ttest_report(std::ostream& out, const std::string& title, const TTestReport& r,
                        std::optional<double> stated_mean = std::nullopt);

bool mean_discrepancy(const TTestReport& r, double stated_mean);

}  // namespace autov
