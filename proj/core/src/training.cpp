#include "autov/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "autov/error.hpp"
#include "autov/parallel.hpp"
#include "bundle.hpp"

namespace autov {

namespace {

constexpr std::string_view kKind = "training-checkpoint";
constexpr int kVersion = 1;
constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStreamBase = 1000;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void check_pair(const PreferencePair& pair, std::span<const EncodedGroup> groups) {
  if (pair.group >= groups.size()) throw StateError("pair refers to missing group " + std::to_string(pair.group));
  const auto n = groups[pair.group].size();
  if (pair.chosen >= n || pair.rejected >= n || pair.chosen == pair.rejected) {
    throw StateError("pair has invalid candidate indices for group " + std::to_string(pair.group));
  }
}

void check_dims(const RankerParams& p, std::span<const EncodedGroup> groups) {
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (g.visual[c].cols() != p.model_dim || g.text[c].cols() != p.model_dim) {
        throw ShapeError("group " + std::to_string(gi) + " has features of width " +
                         std::to_string(g.visual[c].cols()) + " but the ranker expects " +
                         std::to_string(p.model_dim));
      }
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning rate must be >= 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (accumulation_steps < 1 || accumulation_steps > batch_size) {
    throw ValidationError("accumulation steps must be in [1, batch size]");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("moment decays must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (hidden_dim < 1) throw ValidationError("hidden dimension must be >= 1");
}

OptimizerState OptimizerState::fresh(const RankerParams& p) {
  OptimizerState s;
  const auto ts = p.tensors();
  for (std::size_t i = 0; i < RankerParams::kTensorCount; ++i) {
    s.m[i] = TokenMatrix(ts[i]->rows(), ts[i]->cols());
    s.v[i] = TokenMatrix(ts[i]->rows(), ts[i]->cols());
  }
  return s;
}

double softplus(double x) {
  // log(1 + e^x) without overflow for large x or cancellation for very negative x.
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double reward_loss(double s_chosen, double s_rejected) { return softplus(-(s_chosen - s_rejected)); }

TrainingState init_training(const TrainConfig& cfg, std::size_t model_dim) {
  cfg.validate();
  Rng rng = Rng(cfg.seed).split(kInitStream);
  TrainingState s;
  s.params = RankerParams::initialize(rng, model_dim, cfg.hidden_dim, cfg.ranker);
  s.optimizer = OptimizerState::fresh(s.params);
  s.config = cfg;
  return s;
}

void adam_update(std::span<TokenMatrix* const> params, std::span<TokenMatrix> m, std::span<TokenMatrix> v,
                 std::span<const MatrixD> grads, std::uint64_t step, const TrainConfig& cfg) {
  if (params.size() != m.size() || params.size() != v.size() || params.size() != grads.size()) {
    throw ShapeError("optimizer tensor lists differ in length");
  }
  const double t = static_cast<double>(step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto theta = params[i]->data();
    auto mi = m[i].data();
    auto vi = v[i].data();
    const auto g = grads[i].data();
    if (g.size() != theta.size() || mi.size() != theta.size() || vi.size() != theta.size()) {
      throw ShapeError("gradient shape does not match parameters");
    }
    for (std::size_t j = 0; j < theta.size(); ++j) {
      mi[j] = static_cast<float>(cfg.beta1 * mi[j] + (1.0 - cfg.beta1) * g[j]);
      vi[j] = static_cast<float>(cfg.beta2 * vi[j] + (1.0 - cfg.beta2) * g[j] * g[j]);
      const double m_hat = mi[j] / c1;
      const double v_hat = vi[j] / c2;
      theta[j] = static_cast<float>(theta[j] - cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon));
    }
  }
}

void adam_step(RankerParams& p, OptimizerState& opt, const RankerGrads& grad, const TrainConfig& cfg) {
  opt.step += 1;
  const auto ts = p.tensors();
  adam_update(ts, opt.m, opt.v, grad.tensors, opt.step, cfg);
}

double pair_loss_and_gradient(const RankerParams& p, const EncodedGroup& group, std::size_t chosen,
                              std::size_t rejected, RankerGrads& grad) {
  const ScoreResult c = score_features(p, group.visual[chosen], group.text[chosen]);
  const ScoreResult r = score_features(p, group.visual[rejected], group.text[rejected]);
  const double delta = c.score - r.score;
  const double sig = 1.0 / (1.0 + std::exp(delta));
  accumulate_score_gradient(p, c.tape, -sig, grad);
  accumulate_score_gradient(p, r.tape, sig, grad);
  return reward_loss(c.score, r.score);
}

TrainReport train_epochs(TrainingState& state, std::span<const PreferencePair> pairs,
                         std::span<const EncodedGroup> groups, std::size_t until_epoch, const TrainOptions& options) {
  const TrainConfig& cfg = state.config;
  cfg.validate();
  if (pairs.empty()) throw ValidationError("training needs at least one preference pair");
  state.params.validate();
  check_dims(state.params, groups);
  for (const auto& pair : pairs) check_pair(pair, groups);
  for (const auto& pair : options.heldout_pairs) check_pair(pair, options.heldout_groups);

  TrainReport report;
  const auto run_start = Clock::now();
  const std::size_t micro = (cfg.batch_size + cfg.accumulation_steps - 1) / cfg.accumulation_steps;
  std::vector<RankerGrads> slots(micro, RankerGrads::zeros_like(state.params));
  std::vector<double> losses(micro);

  while (state.epochs_completed < until_epoch) {
    const auto epoch_start = Clock::now();
    const std::size_t epoch = state.epochs_completed;
    Rng shuffle_rng = Rng(cfg.seed).split(kShuffleStreamBase + epoch);
    const std::vector<std::size_t> order = shuffle_rng.permutation(pairs.size());

    double epoch_loss = 0.0;
    std::size_t batch_id = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_id) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      RankerGrads total = RankerGrads::zeros_like(state.params);
      double batch_loss = 0.0;
      for (std::size_t mstart = start; mstart < end; mstart += micro) {
        const std::size_t mend = std::min(end, mstart + micro);
        const std::size_t count = mend - mstart;
        parallel_for(count, options.threads, [&](std::size_t k) {
          RankerGrads& slot = slots[k];
          for (auto& t : slot.tensors) t.fill(0.0);
          const PreferencePair& pair = pairs[order[mstart + k]];
          losses[k] = pair_loss_and_gradient(state.params, groups[pair.group], pair.chosen, pair.rejected, slot);
        });
        for (std::size_t k = 0; k < count; ++k) {
          if (!std::isfinite(losses[k]) || !slots[k].all_finite()) {
            const PreferencePair& pair = pairs[order[mstart + k]];
            std::ostringstream msg;
            msg << "non-finite loss in epoch " << epoch + 1 << ", batch " << batch_id << ", pair (group "
                << pair.group << ", chosen " << pair.chosen << ", rejected " << pair.rejected << ")";
            throw NonFiniteLossError(msg.str());
          }
          batch_loss += losses[k];
          total.add(slots[k]);
        }
      }
      const double n = static_cast<double>(end - start);
      total.scale(1.0 / n);
      adam_step(state.params, state.optimizer, total, cfg);
      epoch_loss += batch_loss;
    }
    state.epochs_completed += 1;

    EpochStats stats;
    stats.epoch = state.epochs_completed;
    stats.mean_loss = epoch_loss / static_cast<double>(pairs.size());
    stats.heldout_accuracy =
        options.heldout_pairs.empty()
            ? std::numeric_limits<double>::quiet_NaN()
            : pairwise_accuracy(state.params, options.heldout_pairs, options.heldout_groups, options.threads);
    stats.seconds = seconds_since(epoch_start);
    report.epochs.push_back(stats);
    if (options.on_epoch) options.on_epoch(stats);
  }
  report.wall_seconds = seconds_since(run_start);
  return report;
}

std::vector<EncodedGroup> encode_groups(std::span<const CandidateGroup> groups, const InteractionWeights& w,
                                        TextAggregation aggregation, std::size_t threads) {
  std::vector<EncodedGroup> out(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t i) {
    std::vector<TokenMatrix> visuals;
    visuals.reserve(groups[i].size());
    for (const auto& c : groups[i].candidates) visuals.push_back(c.visual);
    out[i] = encode_group(w, groups[i].query, visuals, aggregation);
  });
  return out;
}

TrainResult train(std::span<const PreferencePair> pairs, std::span<const CandidateGroup> groups,
                  const InteractionWeights& interaction, const TrainConfig& cfg, TextAggregation aggregation,
                  const TrainOptions& options) {
  cfg.validate();
  if (pairs.empty()) throw ValidationError("training needs at least one preference pair");
  if (interaction.model_dim() == 0) throw ShapeError("interaction weights are empty");
  for (const auto& g : groups) {
    if (g.query.cols() != interaction.model_dim()) {
      throw ShapeError("group '" + g.group_id + "' has width " + std::to_string(g.query.cols()) +
                       " but the interaction layer expects " + std::to_string(interaction.model_dim()));
    }
  }
  const std::vector<EncodedGroup> encoded = encode_groups(groups, interaction, aggregation, options.threads);
  TrainResult result{RankerParams{}, TrainReport{}, init_training(cfg, interaction.model_dim())};
  result.report = train_epochs(result.state, pairs, encoded, cfg.epochs, options);
  result.params = result.state.params;
  return result;
}

std::vector<double> score_encoded(const RankerParams& p, const EncodedGroup& group) {
  std::vector<double> scores(group.size());
  for (std::size_t i = 0; i < group.size(); ++i) scores[i] = score_features(p, group.visual[i], group.text[i]).score;
  return scores;
}

double pairwise_accuracy(const RankerParams& p, std::span<const PreferencePair> pairs,
                         std::span<const EncodedGroup> groups, std::size_t threads) {
  if (pairs.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<std::vector<double>> scores(groups.size());
  std::vector<char> needed(groups.size(), 0);
  for (const auto& pair : pairs) needed.at(pair.group) = 1;
  parallel_for(groups.size(), threads, [&](std::size_t g) {
    if (needed[g]) scores[g] = score_encoded(p, groups[g]);
  });
  std::size_t correct = 0;
  for (const auto& pair : pairs)
    if (scores[pair.group][pair.chosen] > scores[pair.group][pair.rejected]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(pairs.size());
}

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path) {
  const TrainConfig& c = state.config;
  const nlohmann::json meta = {{"D", state.params.model_dim},
                               {"h", state.params.hidden_dim},
                               {"activation", activation_name(state.params.config.activation)},
                               {"reduction", score_reduction_name(state.params.config.reduction)},
                               {"learning_rate", c.learning_rate},
                               {"batch_size", c.batch_size},
                               {"epochs", c.epochs},
                               {"seed", c.seed},
                               {"beta1", c.beta1},
                               {"beta2", c.beta2},
                               {"epsilon", c.epsilon},
                               {"accumulation_steps", c.accumulation_steps},
                               {"step", state.optimizer.step},
                               {"epochs_completed", state.epochs_completed}};
  std::vector<detail::NamedTensor> tensors;
  const auto ts = state.params.tensors();
  for (std::size_t i = 0; i < RankerParams::kTensorCount; ++i) {
    const std::string name(RankerParams::kTensorNames[i]);
    tensors.push_back({name, *ts[i]});
    tensors.push_back({"adam_m/" + name, state.optimizer.m[i]});
    tensors.push_back({"adam_v/" + name, state.optimizer.v[i]});
  }
  detail::write_bundle(path, kKind, kVersion, meta, tensors);
}

TrainingState load_checkpoint(const std::filesystem::path& path) {
  const detail::Bundle b = detail::read_bundle(path, kKind, kVersion);
  using detail::meta_field;
  TrainingState s;
  TrainConfig& c = s.config;
  try {
    c.ranker.activation = parse_activation(meta_field<std::string>(b.meta, "activation"));
    c.ranker.reduction = parse_score_reduction(meta_field<std::string>(b.meta, "reduction"));
  } catch (const ParseError& e) {
    throw FormatError(std::string("invalid checkpoint header: ") + e.what());
  }
  c.hidden_dim = meta_field<std::size_t>(b.meta, "h");
  c.learning_rate = meta_field<double>(b.meta, "learning_rate");
  c.batch_size = meta_field<std::size_t>(b.meta, "batch_size");
  c.epochs = meta_field<std::size_t>(b.meta, "epochs");
  c.seed = meta_field<std::uint64_t>(b.meta, "seed");
  c.beta1 = meta_field<double>(b.meta, "beta1");
  c.beta2 = meta_field<double>(b.meta, "beta2");
  c.epsilon = meta_field<double>(b.meta, "epsilon");
  c.accumulation_steps = meta_field<std::size_t>(b.meta, "accumulation_steps");
  s.optimizer.step = meta_field<std::uint64_t>(b.meta, "step");
  s.epochs_completed = meta_field<std::size_t>(b.meta, "epochs_completed");

  s.params.model_dim = meta_field<std::size_t>(b.meta, "D");
  s.params.hidden_dim = c.hidden_dim;
  s.params.config = c.ranker;
  const auto ts = s.params.tensors();
  for (std::size_t i = 0; i < RankerParams::kTensorCount; ++i) {
    const std::string name(RankerParams::kTensorNames[i]);
    *ts[i] = b.get(name);
    s.optimizer.m[i] = b.get("adam_m/" + name);
    s.optimizer.v[i] = b.get("adam_v/" + name);
    if (s.optimizer.m[i].rows() != ts[i]->rows() || s.optimizer.m[i].cols() != ts[i]->cols() ||
        s.optimizer.v[i].rows() != ts[i]->rows() || s.optimizer.v[i].cols() != ts[i]->cols()) {
      throw FormatError("optimizer moments for '" + name + "' do not match the parameter shape");
    }
  }
  try {
    c.validate();
    s.params.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("invalid checkpoint: ") + e.what());
  }
  return s;
}

void write_train_log(const std::filesystem::path& path, std::span<const EpochStats> epochs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PathError("cannot open '" + path.string() + "' for writing");
  out << "epoch\tmean_loss\theldout_accuracy\tseconds\n";
  out << std::fixed;
  for (const auto& e : epochs) {
    out << e.epoch << '\t' << std::setprecision(6) << e.mean_loss << '\t';
    if (std::isnan(e.heldout_accuracy)) out << "nan";
    else out << std::setprecision(6) << e.heldout_accuracy;
    out << '\t' << std::setprecision(3) << e.seconds << '\n';
  }
}

}  // namespace autov
