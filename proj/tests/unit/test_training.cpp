#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "autov/error.hpp"
#include "autov/training.hpp"
#include "oracles.hpp"

using namespace autov;

namespace {

struct Fixture {
  InteractionWeights weights;
  std::vector<CandidateGroup> groups;
  std::vector<EncodedGroup> encoded;
  std::vector<PreferencePair> pairs;
};

Fixture make_fixture(std::uint64_t seed, std::size_t groups = 12, std::size_t n = 4) {
  Rng wr(seed);
  Fixture f{seed_interaction_weights(wr, 8, 2, 16), {}, {}, {}};
  Rng rng(seed + 1);
  for (std::size_t g = 0; g < groups; ++g) {
    std::vector<double> losses(n);
    for (double& l : losses) l = rng.uniform(0.0, 2.0);
    f.groups.push_back(oracle::make_group(rng, losses, 8, 3, 2, "g" + std::to_string(g)));
  }
  f.encoded = encode_groups(f.groups, f.weights, TextAggregation::mean);
  f.pairs = expand_all_pairs(f.groups);
  return f;
}

TrainConfig small_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.hidden_dim = 4;
  cfg.batch_size = 8;
  cfg.epochs = epochs;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(RewardLoss, Examples) {
  EXPECT_NEAR(reward_loss(1.5, 1.5), std::log(2.0), 1e-9);
  const double far = reward_loss(50.0, 0.0);
  EXPECT_LT(far, 1e-20);
  EXPECT_GE(far, 0.0);
  EXPECT_TRUE(std::isfinite(reward_loss(0.0, 1e6)));
  const long double oracle_value = std::log1p(std::exp(2.0L));
  EXPECT_NEAR(reward_loss(0.0, 2.0), static_cast<double>(oracle_value), 1e-12);
  EXPECT_NEAR(reward_loss(0.0, 2.0), 2.126928, 1e-5);
}

TEST(RewardLoss, ConvexityAndShift) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double a = rng.normal(0, 5), b = rng.normal(0, 5), c = rng.normal(0, 50);
    EXPECT_GT(reward_loss(a, b) + reward_loss(b, a), 2.0 * std::log(2.0));
    EXPECT_NEAR(reward_loss(a + c, b + c), reward_loss(a, b), 1e-9);
  }
  EXPECT_NEAR(reward_loss(3.0, 3.0) + reward_loss(3.0, 3.0), 2.0 * std::log(2.0), 1e-15);
}

TEST(Training, ZeroLearningRateKeepsParamsBitExact) {
  const auto f = make_fixture(2);
  auto cfg = small_config(1);
  cfg.learning_rate = 0.0;
  auto state = init_training(cfg, 8);
  const auto initial = state.params;
  train_epochs(state, f.pairs, f.encoded, 1);
  EXPECT_EQ(state.params, initial);
  EXPECT_GT(state.optimizer.step, 0u);
}

TEST(Training, InitialLossNearLn2) {
  const auto f = make_fixture(3);
  auto cfg = small_config(1);
  cfg.learning_rate = 0.0;
  auto state = init_training(cfg, 8);
  const auto report = train_epochs(state, f.pairs, f.encoded, 1);
  ASSERT_EQ(report.epochs.size(), 1u);
  EXPECT_NEAR(report.epochs[0].mean_loss, std::log(2.0), 0.05);
}

TEST(Training, SinglePairConverges) {
  const auto f = make_fixture(4, 1, 2);
  const std::vector<PreferencePair> one = {f.pairs[0]};
  auto cfg = small_config(200);
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-2;
  auto state = init_training(cfg, 8);
  const auto report = train_epochs(state, one, f.encoded, 200);
  ASSERT_EQ(report.epochs.size(), 200u);
  for (std::size_t i = 10; i < report.epochs.size(); ++i)
    EXPECT_LE(report.epochs[i].mean_loss, report.epochs[i - 1].mean_loss) << "step " << i + 1;
  EXPECT_LT(report.epochs.back().mean_loss, 0.1);
}

TEST(Training, ResumeReproducesUninterruptedRun) {
  oracle::TempDir dir("resume");
  const auto f = make_fixture(5);
  const auto cfg = small_config(10);
  auto full = init_training(cfg, 8);
  train_epochs(full, f.pairs, f.encoded, 10);

  auto half = init_training(cfg, 8);
  train_epochs(half, f.pairs, f.encoded, 5);
  save_checkpoint(half, dir / "ckpt.bin");
  auto resumed = load_checkpoint(dir / "ckpt.bin");
  EXPECT_EQ(resumed.params, half.params);
  EXPECT_EQ(resumed.optimizer, half.optimizer);
  EXPECT_EQ(resumed.config, half.config);
  EXPECT_EQ(resumed.epochs_completed, 5u);
  train_epochs(resumed, f.pairs, f.encoded, 10);
  EXPECT_EQ(resumed.params, full.params);
  EXPECT_EQ(resumed.optimizer, full.optimizer);
}

TEST(Training, CorruptCheckpointIsFormatError) {
  oracle::TempDir dir("corrupt");
  const auto state = init_training(small_config(1), 8);
  save_checkpoint(state, dir / "ckpt.bin");
  std::string bytes = oracle::read_file(dir / "ckpt.bin");
  ASSERT_FALSE(bytes.empty());
  bytes[0] = static_cast<char>(bytes[0] ^ 0x5a);
  {
    std::FILE* fp = std::fopen((dir / "bad.bin").string().c_str(), "wb");
    std::fwrite(bytes.data(), 1, bytes.size(), fp);
    std::fclose(fp);
  }
  EXPECT_THROW(load_checkpoint(dir / "bad.bin"), FormatError);
}

TEST(Training, FirstStepMovesAgainstGradientSign) {
  const auto f = make_fixture(6);
  auto cfg = small_config(1);
  auto state = init_training(cfg, 8);
  Rng rng(7);
  for (auto* b : {&state.params.b1_v, &state.params.b1_t})
    for (float& v : b->data()) v = static_cast<float>(rng.normal() * 0.2);
  auto grad = RankerGrads::zeros_like(state.params);
  pair_loss_and_gradient(state.params, f.encoded[0], f.pairs[0].chosen, f.pairs[0].rejected, grad);
  const auto before = state.params;
  adam_step(state.params, state.optimizer, grad, cfg);
  EXPECT_EQ(state.optimizer.step, 1u);
  const auto b = before.tensors();
  const auto a = state.params.tensors();
  std::size_t moved = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t i = 0; i < a[k]->size(); ++i) {
      const double g = grad.tensors[k].data()[i];
      const double delta = static_cast<double>(a[k]->data()[i]) - b[k]->data()[i];
      if (std::abs(g) < 1e-6) continue;
      EXPECT_LT(delta * g, 0.0);
      // A fresh Adam step has magnitude close to the learning rate.
      EXPECT_NEAR(std::abs(delta), cfg.learning_rate, 1e-4);
      ++moved;
    }
  }
  EXPECT_GT(moved, 0u);
}

TEST(Training, PairGradientMatchesBackward) {
  const auto f = make_fixture(8);
  Rng rng(9);
  const auto p = RankerParams::initialize(rng, 8, 4);
  auto grad = RankerGrads::zeros_like(p);
  const auto& pair = f.pairs[3];
  const auto& g = f.encoded[pair.group];
  const double loss = pair_loss_and_gradient(p, g, pair.chosen, pair.rejected, grad);
  const auto sc = score_features(p, g.visual[pair.chosen], g.text[pair.chosen]);
  const auto sr = score_features(p, g.visual[pair.rejected], g.text[pair.rejected]);
  EXPECT_NEAR(loss, reward_loss(sc.score, sr.score), 1e-12);
  const auto ref = backward(p, sc.tape, sr.tape);
  for (std::size_t k = 0; k < ref.tensors.size(); ++k)
    for (std::size_t i = 0; i < ref.tensors[k].size(); ++i)
      EXPECT_NEAR(grad.tensors[k].data()[i], ref.tensors[k].data()[i], 1e-12);
}

TEST(Training, InteractionWeightsStayFrozen) {
  const auto f = make_fixture(10);
  const auto before = f.weights.fingerprint();
  const auto copy = f.weights;
  const auto result = train(f.pairs, f.groups, f.weights, small_config(3));
  EXPECT_EQ(f.weights.fingerprint(), before);
  EXPECT_EQ(f.weights, copy);
  EXPECT_EQ(result.report.epochs.size(), 3u);
}

TEST(Training, DeterministicAcrossThreadCounts) {
  const auto f = make_fixture(11);
  const auto cfg = small_config(3);
  auto one = init_training(cfg, 8);
  TrainOptions single;
  single.threads = 1;
  train_epochs(one, f.pairs, f.encoded, 3, single);
  auto many = init_training(cfg, 8);
  TrainOptions multi;
  multi.threads = 4;
  train_epochs(many, f.pairs, f.encoded, 3, multi);
  EXPECT_EQ(one.params, many.params);
}

TEST(Training, HeldoutAccuracyReported) {
  const auto f = make_fixture(12);
  auto state = init_training(small_config(2), 8);
  TrainOptions opt;
  opt.heldout_pairs = f.pairs;
  opt.heldout_groups = f.encoded;
  std::size_t calls = 0;
  opt.on_epoch = [&](const EpochStats&) { ++calls; };
  const auto report = train_epochs(state, f.pairs, f.encoded, 2, opt);
  EXPECT_EQ(calls, 2u);
  for (const auto& e : report.epochs) {
    EXPECT_GE(e.heldout_accuracy, 0.0);
    EXPECT_LE(e.heldout_accuracy, 1.0);
    EXPECT_GE(e.mean_loss, 0.0);
  }
  EXPECT_NEAR(report.epochs.back().heldout_accuracy, pairwise_accuracy(state.params, f.pairs, f.encoded), 1e-12);
}

TEST(Training, Errors) {
  auto f = make_fixture(13);
  const auto cfg = small_config(1);
  EXPECT_THROW(train({}, f.groups, f.weights, cfg), ValidationError);
  auto wide = f.groups;
  Rng rng(14);
  wide[0].query = oracle::random_tokens(rng, 2, 9);
  EXPECT_THROW(train(f.pairs, wide, f.weights, cfg), ShapeError);
  auto bad = cfg;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ValidationError);

  auto poisoned = f.encoded;
  poisoned[0].visual[0](0, 0) = std::numeric_limits<float>::quiet_NaN();
  auto state = init_training(cfg, 8);
  EXPECT_THROW(train_epochs(state, f.pairs, poisoned, 1), NonFiniteLossError);
}

TEST(Training, LogFormat) {
  oracle::TempDir dir("log");
  const std::vector<EpochStats> epochs = {{1, 0.5, 0.75, 0.25}, {2, 0.25, 0.875, 0.5}};
  write_train_log(dir / "log.tsv", epochs);
  const auto text = oracle::read_file(dir / "log.tsv");
  EXPECT_NE(text.find("1\t0.5"), std::string::npos) << text;
  EXPECT_NE(text.find("2\t0.25"), std::string::npos) << text;
}
