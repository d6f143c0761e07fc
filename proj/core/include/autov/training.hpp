#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "autov/interaction.hpp"
#include "autov/pipeline.hpp"
#include "autov/ranker.hpp"

namespace autov {

struct TrainConfig {
  double learning_rate = 1e-3;
  std::size_t batch_size = 64;  // effective batch, split across accumulation steps
  std::size_t epochs = 40;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t accumulation_steps = 1;
  std::size_t hidden_dim = 16;
  RankerConfig ranker;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Adam moments, stored at the same 32-bit precision as the parameters so a
// checkpoint captures the exact optimizer state.
struct OptimizerState {
  std::array<TokenMatrix, RankerParams::kTensorCount> m;
  std::array<TokenMatrix, RankerParams::kTensorCount> v;
  std::uint64_t step = 0;

  static OptimizerState fresh(const RankerParams& p);
  bool operator==(const OptimizerState&) const = default;
};

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double heldout_accuracy = 0.0;  // NaN without held-out pairs
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  double wall_seconds = 0.0;
};

struct TrainingState {
  RankerParams params;
  OptimizerState optimizer;
  TrainConfig config;
  std::size_t epochs_completed = 0;
};

struct TrainOptions {
  std::span<const PreferencePair> heldout_pairs;
  std::span<const EncodedGroup> heldout_groups;
  std::size_t threads = 0;
  std::function<void(const EpochStats&)> on_epoch;
};

// softplus(-(s_c - s_r)), i.e. -log sigmoid(s_c - s_r).
double reward_loss(double s_chosen, double s_rejected);
double softplus(double x);

// Fresh parameters and optimizer state for cfg.
TrainingState init_training(const TrainConfig& cfg, std::size_t model_dim);

// One Adam update with bias correction over matching tensor lists; `step`
// is the 1-based step count after this update.
void adam_update(std::span<TokenMatrix* const> params, std::span<TokenMatrix> m, std::span<TokenMatrix> v,
                 std::span<const MatrixD> grads, std::uint64_t step, const TrainConfig& cfg);

// One Adam update with bias correction. The gradient is the batch mean.
void adam_step(RankerParams& p, OptimizerState& opt, const RankerGrads& grad, const TrainConfig& cfg);

// Loss and gradient of one preference pair.
double pair_loss_and_gradient(const RankerParams& p, const EncodedGroup& group, std::size_t chosen,
                              std::size_t rejected, RankerGrads& grad);

// Runs epochs until state.epochs_completed == until_epoch. Each epoch draws a
// seeded permutation of all pairs that depends only on (seed, epoch), so a
// resumed run replays the uninterrupted one.
TrainReport train_epochs(TrainingState& state, std::span<const PreferencePair> pairs,
                         std::span<const EncodedGroup> groups, std::size_t until_epoch, const TrainOptions& options = {});

struct TrainResult {
  RankerParams params;
  TrainReport report;
  TrainingState state;
};

// Encodes the groups with the frozen interaction layer, initializes from
// cfg.seed and trains for cfg.epochs.
TrainResult train(std::span<const PreferencePair> pairs, std::span<const CandidateGroup> groups,
                  const InteractionWeights& interaction, const TrainConfig& cfg,
                  TextAggregation aggregation = TextAggregation::mean, const TrainOptions& options = {});

std::vector<EncodedGroup> encode_groups(std::span<const CandidateGroup> groups, const InteractionWeights& w,
                                        TextAggregation aggregation, std::size_t threads = 0);

std::vector<double> score_encoded(const RankerParams& p, const EncodedGroup& group);

// Fraction of pairs whose chosen member scores strictly higher.
double pairwise_accuracy(const RankerParams& p, std::span<const PreferencePair> pairs,
                         std::span<const EncodedGroup> groups, std::size_t threads = 0);

void save_checkpoint(const TrainingState& state, const std::filesystem::path& path);
TrainingState load_checkpoint(const std::filesystem::path& path);

void write_train_log(const std::filesystem::path& path, std::span<const EpochStats> epochs);

}  // namespace autov
