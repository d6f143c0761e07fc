// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "autov/bench.hpp"
#include "autov/dataset.hpp"
#include "autov/error.hpp"
#include "autov/pipeline.hpp"
#include "autov/report.hpp"
#include "autov/retrieval.hpp"
#include "autov/stats.hpp"
#include "autov/synthetic.hpp"
#include "autov/training.hpp"
#include "oracles.hpp"

using namespace autov;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string num(double v) { return fmt("%.6g", v); }

// --- 1: reward loss ---------------------------------------------------------

Verdict reward_loss_exactness() {
  Rng rng(1);
  double worst_ln2 = 0.0, worst_shift = 0.0;
  for (int i = 0; i < 100; ++i) {
    const double s = rng.normal(0.0, 10.0);
    worst_ln2 = std::max(worst_ln2, std::abs(reward_loss(s, s) - std::numbers::ln2));
    const double a = rng.normal(0.0, 5.0), b = rng.normal(0.0, 5.0), c = rng.normal(0.0, 100.0);
    worst_shift = std::max(worst_shift, std::abs(reward_loss(a + c, b + c) - reward_loss(a, b)));
  }
  return {worst_ln2 <= 1e-9 && worst_shift <= 1e-9,
          "max |L(s,s) - ln2| = " + num(worst_ln2) + ", max shift error = " + num(worst_shift)};
}

// --- 2: gradients -----------------------------------------------------------

Verdict gradient_correctness() {
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  const RankerConfig cfg;  // default activation and reduction
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    auto p = RankerParams::initialize(rng, 8, 4, cfg);
    for (auto* b : {&p.b1_v, &p.b2_v, &p.b1_t, &p.b2_t})
      for (float& v : b->data()) v = static_cast<float>(rng.normal() * 0.3);
    const auto vc = oracle::random_tokens(rng, 3, 8);
    const auto vr = oracle::random_tokens(rng, 3, 8);
    const auto t = oracle::random_tokens(rng, 2, 8);
    const auto g = backward(p, score_features(p, vc, t).tape, score_features(p, vr, t).tape);
    const auto check = oracle::check_pair_gradient(p, vc, vr, t, g, 1e-3);
    worst = std::max(worst, check.max_rel_error);
    checked += check.checked;
    skipped += check.skipped_kinks;
  }
  return {worst < 1e-4, "20 seeds, max relative error " + num(worst) + " over " + std::to_string(checked) +
                            " coordinates (" + std::to_string(skipped) + " at activation kinks skipped)"};
}

// --- 3: parameter count -----------------------------------------------------

Verdict parameter_count() {
  const std::vector<std::pair<std::size_t, std::size_t>> dims = {{8, 4}, {64, 16}, {512, 64}, {4096, 64}, {5, 5}};
  bool ok = true;
  std::string detail;
  for (auto [d, h] : dims) {
    const std::size_t got = RankerParams::zeros(d, h).parameter_count();
    const std::size_t want = 2 * h * (d + h + 2);
    ok &= got == want;
    detail += "(" + std::to_string(d) + "," + std::to_string(h) + ")=" + std::to_string(got) + " ";
  }
  ok &= RankerParams::zeros(4096, 64).parameter_count() == 532736;
  return {ok, detail};
}

// --- 4: pair expansion ------------------------------------------------------

Verdict pair_expansion() {
  Rng rng(4);
  std::size_t bad = 0;
  for (int g = 0; g < 1000; ++g) {
    const std::size_t n = 2 + rng.below(15);
    std::vector<double> losses(n);
    for (double& l : losses) l = rng.below(4) == 0 ? 1.0 : rng.uniform(0.0, 3.0);  // some ties
    const auto pairs = expand_pairs(rank_group(oracle::make_group(rng, losses)));
    std::set<std::pair<std::size_t, std::size_t>> got, want;
    for (const auto& p : pairs) {
      got.insert({p.chosen, p.rejected});
      if (losses[p.chosen] > losses[p.rejected]) ++bad;
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) want.insert(losses[j] < losses[i] ? std::pair{j, i} : std::pair{i, j});
    if (pairs.size() != n * (n - 1) / 2 || got != want) ++bad;
  }
  return {bad == 0, "1000 groups with n in [2,16], " + std::to_string(bad) + " mismatches"};
}

// --- 5: learnability --------------------------------------------------------

Verdict learnability() {
  BenchConfig cfg;
  cfg.train_baselines = false;
  cfg.sweep_sizes.clear();
  const auto run = run_strategy_comparison(cfg, 0);
  const auto& retrieval = run.result("pairwise+prefilter");
  const auto& pairwise = run.result("pairwise");
  const auto& random = run.result("random");
  const double sigma = std::sqrt(0.25 * 0.75 / static_cast<double>(random.groups));
  const bool random_ok = std::abs(random.agreement - 0.25) <= 3.0 * sigma;
  const bool ok = retrieval.agreement >= 0.95 && retrieval.regret <= 0.02 && random_ok;
  return {ok, "retrieval agreement " + fmt("%.4f", retrieval.agreement) + " (need >= 0.95), regret " +
                  fmt("%.5f", retrieval.regret) + " (need <= 0.02); scorer without pre-filter agreement " +
                  fmt("%.4f", pairwise.agreement) + ", regret " + fmt("%.5f", pairwise.regret) +
                  "; random agreement " + fmt("%.4f", random.agreement) + " (3 sigma = " + fmt("%.4f", 3 * sigma) +
                  "); " + std::to_string(run.train_groups_kept) + " train groups kept"};
}

// --- 6: strategy trend ------------------------------------------------------

Verdict strategy_trend() {
  BenchConfig cfg;
  cfg.synthetic.noise_std = 0.1;
  std::vector<BenchRun> runs;
  for (std::uint64_t seed = 0; seed < 5; ++seed) runs.push_back(run_strategy_comparison(cfg, seed));
  auto mean_regret = [&](const std::string& s) {
    const auto r = regrets_of(runs, s);
    double sum = 0.0;
    for (double v : r) sum += v;
    return sum / static_cast<double>(r.size());
  };
  const double pw = mean_regret("pairwise"), lw = mean_regret("listwise"), gate = mean_regret("gate"),
               reg = mean_regret("regression");
  const auto t = paired_ttest(regrets_of(runs, "regression"), regrets_of(runs, "pairwise"));
  const bool order = pw <= lw && lw <= gate && gate <= reg;
  const bool significant = t.mean_difference > 0.0 && t.p_value < 0.05;
  std::string detail = "mean regret pairwise " + fmt("%.5f", pw) + ", listwise " + fmt("%.5f", lw) + ", gate " +
                       fmt("%.5f", gate) + ", regression " + fmt("%.5f", reg) + "; ordering " +
                       (order ? "holds" : "violated") + "; regression - pairwise mean " +
                       fmt("%.5f", t.mean_difference) + ", t " + fmt("%.3f", t.t_statistic) + ", p " +
                       fmt("%.3g", t.p_value);
  return {order && significant, detail};
}

// --- 7: pre-filter ----------------------------------------------------------

Verdict prefilter_behavior() {
  SyntheticConfig with;
  with.train_groups = 1;
  with.test_groups = 1000;
  with.outlier_fraction = 1.0;
  with.seed = 7;
  const auto planted = generate_synthetic(with);
  std::size_t removed_outlier = 0, planted_count = 0;
  for (std::size_t i = 0; i < planted.test.data.groups.size(); ++i) {
    if (!planted.test.outlier[i]) continue;
    ++planted_count;
    const auto r = prefilter(planted.test.data.groups[i]);
    removed_outlier += r.removed == planted.test.outlier[i];
  }

  SyntheticConfig clean;
  clean.train_groups = 1;
  clean.test_groups = 1000;
  clean.seed = 8;
  const auto bench = generate_synthetic(clean);
  std::size_t removed_best = 0;
  for (const auto& g : bench.test.data.groups) {
    const auto losses = true_losses(g);
    const double best = *std::min_element(losses.begin(), losses.end());
    const auto r = prefilter(g);
    if (r.removed && losses[*r.removed] == best) ++removed_best;
  }
  const double best_rate = static_cast<double>(removed_best) / static_cast<double>(bench.test.data.groups.size());
  const bool ok = planted_count == 1000 && removed_outlier == planted_count && best_rate <= 0.05;
  return {ok, "outlier removed in " + std::to_string(removed_outlier) + "/" + std::to_string(planted_count) +
                  " planted groups; oracle-best removed in " + std::to_string(removed_best) + "/1000 clean groups (" +
                  fmt("%.1f", 100.0 * best_rate) + "%)"};
}

// --- 8: filtering -----------------------------------------------------------

Verdict filtering_criteria() {
  Rng rng(8);
  std::vector<CandidateGroup> groups;
  std::set<std::size_t> flat, heavy;
  for (std::size_t i = 0; i < 200; ++i) {
    std::vector<double> losses(4);
    if (i % 50 == 7) {
      losses.assign(4, rng.uniform(0.5, 1.5));
      flat.insert(i);
    } else if (i % 50 == 31) {
      for (double& l : losses) l = rng.uniform(8.0, 12.0);
      heavy.insert(i);
    } else {
      for (double& l : losses) l = rng.uniform(0.0, 3.0);
    }
    groups.push_back(oracle::make_group(rng, losses));
  }
  const FilterConfig cfg;
  const auto r = filter_groups(groups, cfg);
  std::size_t wrong = 0, flat_hits = 0, heavy_hits = 0;
  for (const auto& d : r.dropped) {
    if (flat.count(d.index)) {
      flat_hits += d.reason == DropReason::low_variance;
      wrong += d.reason != DropReason::low_variance;
    } else if (heavy.count(d.index)) {
      heavy_hits += d.reason == DropReason::high_mean_loss;
      wrong += d.reason != DropReason::high_mean_loss;
    }
  }
  std::vector<CandidateGroup> kept;
  for (std::size_t i : r.kept) kept.push_back(groups[i]);
  const auto again = filter_groups(kept, cfg, r.mean_threshold);
  const bool partition = r.kept.size() + r.dropped.size() == groups.size();
  const bool ok = flat_hits == flat.size() && heavy_hits == heavy.size() && wrong == 0 && again.dropped.empty() &&
                  partition;
  return {ok, std::to_string(flat_hits) + "/" + std::to_string(flat.size()) + " zero-variance and " +
                  std::to_string(heavy_hits) + "/" + std::to_string(heavy.size()) +
                  " high-mean groups dropped with the right reason; re-filter drops " +
                  std::to_string(again.dropped.size())};
}

// --- 9: determinism and resume ----------------------------------------------

Verdict determinism_and_resume() {
  oracle::TempDir dir("acceptance_determinism");
  SyntheticConfig syn;
  syn.train_groups = 300;
  syn.test_groups = 100;
  syn.seed = 9;
  TrainConfig tc;
  tc.epochs = 6;
  tc.seed = 9;

  auto produce = [&](const std::string& tag) {
    const fs::path sub = dir.path() / tag;
    fs::create_directories(sub);
    const auto bench = generate_synthetic(syn);
    save_dataset(bench.train.data, sub / "train.jsonl");
    save_dataset(bench.test.data, sub / "test.jsonl");
    const auto w = synthetic_interaction_weights(syn.seed, syn.model_dim, 4, 256);
    save_interaction_weights(w, sub / "w.bin");
    const auto train = load_dataset(sub / "train.jsonl");
    const auto pairs = expand_all_pairs(train.groups);
    const auto result = autov::train(pairs, train.groups, w, tc);
    save_checkpoint(result.state, sub / "checkpoint.bin");
    save_ranker(result.params, sub / "ranker.bin");
    batch_retrieve(sub / "test.jsonl", sub / "ranker.bin", sub / "w.bin", {}, sub / "results.tsv");
    return result.state;
  };
  const auto first = produce("a");
  produce("b");

  std::size_t files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir.path() / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto other = dir.path() / "b" / fs::relative(e.path(), dir.path() / "a");
    if (oracle::read_file(e.path()) != oracle::read_file(other)) ++differing;
  }

  const auto train = load_dataset(dir.path() / "a" / "train.jsonl");
  const auto w = load_interaction_weights(dir.path() / "a" / "w.bin");
  const auto encoded = encode_groups(train.groups, w, TextAggregation::mean);
  const auto pairs = expand_all_pairs(train.groups);
  auto partial = init_training(tc, w.model_dim());
  train_epochs(partial, pairs, encoded, 3);
  save_checkpoint(partial, dir.path() / "partial.bin");
  auto resumed = load_checkpoint(dir.path() / "partial.bin");
  train_epochs(resumed, pairs, encoded, tc.epochs);
  const bool resume_ok = resumed.params == first.params && resumed.optimizer == first.optimizer;

  return {differing == 0 && files > 0 && resume_ok,
          std::to_string(files - differing) + "/" + std::to_string(files) +
              " files byte-identical across two runs; 3+3 epoch resume " +
              (resume_ok ? "matches" : "differs from") + " the uninterrupted 6-epoch run"};
}

// --- 10: statistics ---------------------------------------------------------

Verdict statistical_machinery() {
  const std::vector<double> diffs = {2.4, 2.4, 2.6, 2.5, 2.4};
  const std::vector<double> zeros(diffs.size(), 0.0);
  const auto r = paired_ttest(diffs, zeros);
  bool degenerate_raised = false;
  try {
    const std::vector<double> same = {1.0, 1.0, 1.0};
    paired_ttest(same, same);
  } catch (const DegenerateStatisticsError&) {
    degenerate_raised = true;
  }
  std::string detail = "mean " + fmt("%.4f", r.mean_difference) + ", std " + fmt("%.4f", r.std_difference) + ", t " +
                       fmt("%.3f", r.t_statistic) + ", p " + fmt("%.3g", r.p_value) + "; zero variance " +
                       (degenerate_raised ? "raises" : "does not raise");
  if (mean_discrepancy(r, 2.06)) detail += "; stated mean 2.06 differs from the recomputed mean";
  return {r.p_value < 0.05 && degenerate_raised, detail};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Verdict()> check;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  const std::vector<Criterion> criteria = {
      {1, "reward loss exactness", 1.0, reward_loss_exactness},
      {2, "gradient correctness", 30.0, gradient_correctness},
      {3, "parameter count", 1.0, parameter_count},
      {4, "pair expansion", 5.0, pair_expansion},
      {5, "learnability", 300.0, learnability},
      {6, "strategy trend", 1200.0, strategy_trend},
      {7, "pre-filter behavior", 30.0, prefilter_behavior},
      {8, "filtering criteria", 5.0, filtering_criteria},
      {9, "determinism and resume", 120.0, determinism_and_resume},
      {10, "statistical machinery", 1.0, statistical_machinery},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = v.pass && in_time;
    failures += !pass;
    std::printf("%s criterion %d (%s): %s [%.2f s of %.0f s%s]\n", pass ? "PASS" : "FAIL", c.id, c.name,
                v.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
