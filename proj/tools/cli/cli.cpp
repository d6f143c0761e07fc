#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "autov/bench.hpp"
#include "autov/dataset.hpp"
#include "autov/error.hpp"
#include "autov/report.hpp"
#include "autov/retrieval.hpp"
#include "autov/stats.hpp"
#include "autov/synthetic.hpp"
#include "autov/training.hpp"
#include "settings.hpp"

namespace autov::cli {

namespace fs = std::filesystem;

namespace {

struct Paths {
  std::string config;
  std::string out = ".";
  std::string input;
  std::string interaction;
  std::string ranker;
  std::string pairs;
  std::string heldout;
  std::string resume;
};

struct Context {
  Settings settings;
  Paths paths;
  std::ostream& out;
  std::shared_ptr<spdlog::logger> log;
};

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto logger = std::make_shared<spdlog::logger>("autov_rank", sink);
  logger->set_pattern("[%l] %v");
  auto level = spdlog::level::warn;
  if (const char* env = std::getenv("AUTOV_RANK_LOG")) {
    const std::string name = env;
    level = spdlog::level::from_str(name);
    if (level == spdlog::level::off && name != "off") level = spdlog::level::warn;
  }
  logger->set_level(level);
  return logger;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError("missing required " + what);
  if (!fs::is_regular_file(path)) throw PathError(what + " not found: " + path);
}

fs::path prepare_out(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!fs::is_directory(dir)) throw PathError("cannot create output directory " + dir);
  return fs::path(dir);
}

void header(Context& c, const std::string& command) {
  c.out << "# autov_rank " << command << "\n# seed " << c.settings.seed << "\n";
}

BenchLog bench_log(Context& c) {
  return [log = c.log](std::string_view msg) { log->info("{}", msg); };
}

int cmd_gen(Context& c) {
  const fs::path dir = prepare_out(c.paths.out);
  const auto& cfg = c.settings.bench;
  c.log->info("generating synthetic benchmark");
  const SyntheticBenchmark b = generate_synthetic(cfg.synthetic);
  save_dataset(b.train.data, dir / "train.jsonl");
  save_dataset(b.test.data, dir / "test.jsonl");
  const InteractionWeights w = synthetic_interaction_weights(c.settings.seed, cfg.synthetic.model_dim,
                                                             cfg.interaction_heads, cfg.interaction_ff_dim);
  save_interaction_weights(w, dir / "interaction.bin");
  std::size_t outliers = 0;
  if (cfg.synthetic.outlier_fraction > 0.0) {
    std::ofstream f(dir / "outliers.tsv", std::ios::binary);
    f << "group_id\tslot\n";
    for (const auto* split : {&b.train, &b.test}) {
      for (std::size_t i = 0; i < split->outlier.size(); ++i) {
        if (!split->outlier[i]) continue;
        f << split->data.groups[i].group_id << '\t' << *split->outlier[i] << '\n';
        ++outliers;
      }
    }
  }
  header(c, "gen");
  c.out << "train_groups " << b.train.data.groups.size() << "\ntest_groups " << b.test.data.groups.size()
        << "\npool_size " << cfg.synthetic.pool_size << "\nnoise_std " << format_double(cfg.synthetic.noise_std)
        << "\nplanted_outliers " << outliers << "\n";
  return kExitOk;
}

int cmd_filter(Context& c) {
  require_file(c.paths.input, "--input dataset");
  const fs::path dir = prepare_out(c.paths.out);
  const Dataset ds = load_dataset(c.paths.input);
  const FilterResult f = filter_groups(ds.groups, c.settings.bench.filter);
  Dataset kept{ds.dims, {}};
  for (std::size_t i : f.kept) kept.groups.push_back(ds.groups[i]);
  save_dataset(kept, dir / "kept.jsonl");
  std::ofstream d(dir / "dropped.tsv", std::ios::binary);
  d << "group_id\treason\tloss_std\tloss_mean\n";
  for (const auto& g : f.dropped) {
    d << ds.groups[g.index].group_id << '\t' << drop_reason_name(g.reason) << '\t' << fixed6(g.loss_std) << '\t'
      << fixed6(g.loss_mean) << '\n';
  }
  header(c, "filter");
  c.out << "groups " << ds.groups.size() << "\nkept " << f.kept.size() << "\ndropped " << f.dropped.size()
        << "\nmean_threshold " << fixed6(f.mean_threshold) << "\n";
  return kExitOk;
}

int cmd_pairs(Context& c) {
  require_file(c.paths.input, "--input dataset");
  const fs::path dir = prepare_out(c.paths.out);
  const Dataset ds = load_dataset(c.paths.input);
  std::vector<Quadruple> quads;
  for (std::size_t i = 0; i < ds.groups.size(); ++i) quads.push_back(rank_group(ds.groups[i], i));
  const auto pairs = expand_all_pairs(ds.groups);
  write_pairs(dir / "pairs.tsv", pairs, ds.groups);
  write_quadruples(dir / "quadruples.jsonl", quads);
  header(c, "pairs");
  c.out << "groups " << ds.groups.size() << "\npairs " << pairs.size() << "\n";
  return kExitOk;
}

int cmd_train(Context& c) {
  require_file(c.paths.input, "--input dataset");
  require_file(c.paths.interaction, "--interaction weights");
  if (!c.paths.pairs.empty()) require_file(c.paths.pairs, "--pairs file");
  if (!c.paths.heldout.empty()) require_file(c.paths.heldout, "--heldout dataset");
  if (!c.paths.resume.empty()) require_file(c.paths.resume, "--resume checkpoint");
  const fs::path dir = prepare_out(c.paths.out);
  const auto& cfg = c.settings.bench;

  const Dataset ds = load_dataset(c.paths.input);
  const InteractionWeights w = load_interaction_weights(c.paths.interaction);
  if (w.model_dim() != ds.dims.model_dim) {
    throw ShapeError("interaction weights have D = " + std::to_string(w.model_dim()) + " but the dataset has D = " +
                     std::to_string(ds.dims.model_dim));
  }
  const auto pairs = c.paths.pairs.empty() ? expand_all_pairs(ds.groups) : read_pairs(c.paths.pairs, ds.groups);
  if (pairs.empty()) throw ValidationError("no preference pairs to train on");

  TrainingState state;
  if (c.paths.resume.empty()) {
    state = init_training(cfg.train, ds.dims.model_dim);
  } else {
    state = load_checkpoint(c.paths.resume);
    TrainConfig wanted = cfg.train;
    wanted.epochs = state.config.epochs;
    if (!(wanted == state.config)) c.log->warn("resuming with the checkpoint's training config");
    state.config.epochs = cfg.train.epochs;
  }

  c.log->info("encoding {} groups", ds.groups.size());
  const auto encoded = encode_groups(ds.groups, w, cfg.aggregation, cfg.threads);
  std::vector<PreferencePair> heldout_pairs;
  std::vector<EncodedGroup> heldout_encoded;
  if (!c.paths.heldout.empty()) {
    const Dataset held = load_dataset(c.paths.heldout);
    heldout_pairs = expand_all_pairs(held.groups);
    heldout_encoded = encode_groups(held.groups, w, cfg.aggregation, cfg.threads);
  }
  TrainOptions opts;
  opts.threads = cfg.threads;
  opts.heldout_pairs = heldout_pairs;
  opts.heldout_groups = heldout_encoded;
  opts.on_epoch = [&](const EpochStats& e) {
    c.log->info("epoch {} loss {:.6f} heldout {:.4f}", e.epoch, e.mean_loss, e.heldout_accuracy);
  };
  const TrainReport report = train_epochs(state, pairs, encoded, cfg.train.epochs, opts);

  save_ranker(state.params, dir / "ranker.bin");
  save_checkpoint(state, dir / "checkpoint.bin");
  write_train_log(dir / "train_log.tsv", report.epochs);

  header(c, "train");
  c.out << "groups " << ds.groups.size() << "\npairs " << pairs.size() << "\nepochs_completed "
        << state.epochs_completed << "\nparameters " << state.params.parameter_count() << "\n";
  if (!report.epochs.empty()) {
    c.out << "final_loss " << fixed6(report.epochs.back().mean_loss) << "\n";
    if (!heldout_pairs.empty()) c.out << "heldout_accuracy " << fixed6(report.epochs.back().heldout_accuracy) << "\n";
  }
  return kExitOk;
}

int cmd_rank(Context& c) {
  require_file(c.paths.input, "--input dataset");
  require_file(c.paths.ranker, "--ranker checkpoint");
  require_file(c.paths.interaction, "--interaction weights");
  const fs::path dir = prepare_out(c.paths.out);
  const auto& cfg = c.settings.bench;
  const BatchSummary s =
      batch_retrieve(c.paths.input, c.paths.ranker, c.paths.interaction, cfg.retrieval, dir / "results.tsv", cfg.threads);
  header(c, "rank");
  c.out << "groups " << s.groups << "\nerrors " << s.errors << "\nslot_histogram";
  for (std::size_t v : s.slot_histogram) c.out << ' ' << v;
  c.out << "\n";
  if (s.errors > 0) {
    c.log->error("{} groups could not be ranked; see results.tsv", s.errors);
    return kExitGroupErrors;
  }
  return kExitOk;
}

void write_ttest_section(std::ostream& f, const std::string& title, std::span<const double> a, std::span<const double> b,
                         std::optional<double> stated_mean) {
  try {
    write_ttest_report(f, title, paired_ttest(a, b), stated_mean);
  } catch (const DegenerateStatisticsError& e) {
    f << "[" << title << "]\nerror degenerate-statistics " << e.what() << "\n";
  }
}

int cmd_bench(Context& c) {
  const fs::path dir = prepare_out(c.paths.out);
  const auto& cfg = c.settings.bench;
  std::vector<BenchRun> runs;
  for (std::size_t r = 0; r < cfg.runs; ++r) runs.push_back(run_strategy_comparison(cfg, c.settings.seed + r, bench_log(c)));
  std::vector<SweepRow> sweep;
  if (!cfg.sweep_sizes.empty()) sweep = pool_size_sweep(cfg, c.settings.seed, bench_log(c));

  const std::vector<std::string> meta = {
      "autov_rank bench",
      "seed " + std::to_string(c.settings.seed),
      "runs " + std::to_string(cfg.runs),
      "noise_std " + format_double(cfg.synthetic.noise_std),
      "pool_size " + std::to_string(cfg.synthetic.pool_size),
  };
  const auto summary = summarize_runs(runs);
  {
    std::ofstream f(dir / "strategies.tsv", std::ios::binary);
    write_strategy_table(f, summary, meta);
  }
  {
    std::ofstream f(dir / "sweep.tsv", std::ios::binary);
    write_sweep_table(f, sweep, meta);
  }
  {
    std::ofstream f(dir / "records.jsonl", std::ios::binary);
    write_records(f, runs, sweep, c.settings.seed);
  }
  {
    std::ofstream f(dir / "ttest.txt", std::ios::binary);
    for (const auto& line : meta) f << "# " << line << "\n";
    if (cfg.train_baselines && runs.size() >= 2) {
      const auto regression = regrets_of(runs, "regression");
      const auto pairwise = regrets_of(runs, "pairwise");
      write_ttest_section(f, "regret: regression minus pairwise", regression, pairwise, std::nullopt);
    } else {
      f << "[regret: regression minus pairwise]\nskipped: needs bench.runs >= 2 and bench.train_baselines\n";
    }
    if (!c.settings.ttest_reference.empty()) {
      const std::vector<double> zeros(c.settings.ttest_reference.size(), 0.0);
      write_ttest_section(f, "reference differences", c.settings.ttest_reference, zeros, c.settings.ttest_stated_mean);
    }
  }
  header(c, "bench");
  write_strategy_table(c.out, summary);
  if (!sweep.empty()) write_sweep_table(c.out, sweep);
  return kExitOk;
}

int exit_code_for(const Error& e) {
  if (dynamic_cast<const UsageError*>(&e)) return kExitUsage;
  if (dynamic_cast<const PathError*>(&e)) return kExitPath;
  return kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"autov_rank: pairwise visual-prompt ranking engine", "autov_rank"};
  app.require_subcommand(1);
  app.fallthrough();
  app.footer("Config keys (file: '[section]' then 'key = value'; flag: --section.key VALUE):\n" + key_listing() +
             "\nPrecedence: defaults, then --config file, then flags. AUTOV_RANK_LOG sets verbosity "
             "(trace, debug, info, warn, error, off).");

  Paths paths;
  app.add_option("--config", paths.config, "config file of key = value sections");
  app.add_option("--out", paths.out, "output directory")->capture_default_str();

  std::map<std::string, std::string> overrides;
  const Settings defaults;
  for (const auto& k : keys()) {
    app.add_option("--" + k.name, overrides[k.name], k.help + " [" + k.get(defaults) + "]")
        ->type_name("VALUE")
        ->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }

  auto* gen = app.add_subcommand("gen", "generate a synthetic benchmark (train.jsonl, test.jsonl, interaction.bin)");
  auto* filter = app.add_subcommand("filter", "filter groups by loss variance and mean (kept.jsonl, dropped.tsv)");
  filter->add_option("--input", paths.input, "dataset file");
  auto* pairs = app.add_subcommand("pairs", "rank groups and expand preference pairs (pairs.tsv, quadruples.jsonl)");
  pairs->add_option("--input", paths.input, "dataset file");
  auto* train = app.add_subcommand("train", "train the ranker (ranker.bin, checkpoint.bin, train_log.tsv)");
  train->add_option("--input", paths.input, "training dataset");
  train->add_option("--interaction", paths.interaction, "frozen interaction weights");
  train->add_option("--pairs", paths.pairs, "preference pairs (default: all pairs of every group)");
  train->add_option("--heldout", paths.heldout, "held-out dataset for per-epoch pair accuracy");
  train->add_option("--resume", paths.resume, "training checkpoint to continue from");
  auto* rank = app.add_subcommand("rank", "select a candidate per group (results.tsv)");
  rank->add_option("--input", paths.input, "dataset file");
  rank->add_option("--ranker", paths.ranker, "ranker checkpoint");
  rank->add_option("--interaction", paths.interaction, "frozen interaction weights");
  auto* bench = app.add_subcommand("bench", "compare strategies and sweep pool sizes (strategies.tsv, sweep.tsv, records.jsonl, ttest.txt)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  auto log = make_logger(err);
  try {
    Context c{Settings{}, paths, out, log};
    if (!paths.config.empty()) apply_config_file(c.settings, paths.config);
    for (const auto& k : keys()) {
      const auto* opt = app.get_option("--" + k.name);
      if (opt->count() > 0) set_key(c.settings, k.name, overrides[k.name]);
    }
    c.settings.apply_seed();
    c.settings.validate();

    if (gen->parsed()) return cmd_gen(c);
    if (filter->parsed()) return cmd_filter(c);
    if (pairs->parsed()) return cmd_pairs(c);
    if (train->parsed()) return cmd_train(c);
    if (rank->parsed()) return cmd_rank(c);
    if (bench->parsed()) return cmd_bench(c);
    throw UsageError("no subcommand given");
  } catch (const Error& e) {
    err << "error[" << e.kind() << "]: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error[internal]: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace autov::cli
