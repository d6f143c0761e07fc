#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>

#include "autov/interaction.hpp"
#include "autov/pipeline.hpp"
#include "autov/ranker.hpp"
#include "autov/retrieval.hpp"
#include "autov/training.hpp"

namespace autov {

// Maps a group to a selected candidate index. `encoded` carries the frozen
// interaction outputs for learned selectors and may be null for the others.
class Selector {
 public:
  virtual ~Selector() = default;
  virtual std::string name() const = 0;
  virtual std::size_t select(const CandidateGroup& group, const EncodedGroup* encoded, std::size_t index) const = 0;
};

// Gate baseline: logit_i = pool(V~_i)^T W pool(T~_i) / sqrt(D).
struct GateParams {
  std::size_t model_dim = 0;
  TokenMatrix weight;  // D x D
};

double gate_logit(const GateParams& gate, const TokenMatrix& v_tilde, const TokenMatrix& t_tilde);

std::unique_ptr<Selector> strategy_fixed(std::size_t slot);
// Uniform choice seeded by (seed, group index).
std::unique_ptr<Selector> strategy_random(std::uint64_t seed);
// Argmin true loss; reference for tests and reports.
std::unique_ptr<Selector> strategy_oracle();
std::unique_ptr<Selector> strategy_pairwise(RankerParams params);
std::unique_ptr<Selector> strategy_listwise(RankerParams params);
// Selects the lowest predicted loss.
std::unique_ptr<Selector> strategy_regression(RankerParams params);
std::unique_ptr<Selector> strategy_gate(GateParams gate);
// The full retrieval path (pre-filter, interaction over survivors, argmax).
std::unique_ptr<Selector> strategy_retrieval(RankerParams params, std::shared_ptr<const InteractionWeights> w,
                                             RetrievalConfig cfg, std::string name = "pairwise+prefilter");

// Baseline trainers. All share the pairwise trainer's initialization, Adam
// settings, epochs and seed. Regression batches cfg.batch_size candidates;
// list-wise and gate batches cfg.batch_size / n groups so every step sees
// the same number of scored candidates.
RankerParams train_regression(std::span<const CandidateGroup> groups, std::span<const EncodedGroup> encoded,
                              const TrainConfig& cfg, std::size_t threads = 0);
RankerParams train_listwise(std::span<const CandidateGroup> groups, std::span<const EncodedGroup> encoded,
                            const TrainConfig& cfg, std::size_t threads = 0);
GateParams train_gate(std::span<const CandidateGroup> groups, std::span<const EncodedGroup> encoded,
                      const TrainConfig& cfg, double temperature_start = 1.0, double temperature_end = 0.1,
                      std::size_t threads = 0);

// Plackett-Luce negative log-likelihood of `order` (best first) under scores.
double plackett_luce_nll(std::span<const double> scores, std::span<const std::size_t> order);
// Its gradient with respect to the scores.
std::vector<double> plackett_luce_gradient(std::span<const double> scores, std::span<const std::size_t> order);

}  // namespace autov
