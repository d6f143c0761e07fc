#include "autov/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "autov/error.hpp"
#include "autov/parallel.hpp"

namespace autov {

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStreamBase = 1000;
constexpr std::uint64_t kGumbelStreamBase = 5000;

const EncodedGroup& require_encoded(const EncodedGroup* enc, const CandidateGroup& g, const std::string& who) {
  if (enc == nullptr) throw StateError(who + " selector needs encoded features");
  if (enc->size() != g.size()) throw StateError(who + " selector got features for a different group");
  return *enc;
}

void require_trained(const RankerParams& p, const std::string& who) {
  if (p.model_dim == 0 || p.w1_v.empty()) throw StateError(who + " selector used before training");
}

std::vector<double> observed(const CandidateGroup& g) {
  std::vector<double> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.candidates[i].loss) throw IncompleteGroupError("group '" + g.group_id + "' has a candidate without loss");
    out.push_back(*g.candidates[i].loss);
  }
  return out;
}

std::size_t argmin_lowest_index(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] < v[best]) best = i;
  return best;
}

class FixedSelector final : public Selector {
 public:
  explicit FixedSelector(std::size_t slot) : slot_(slot) {}
  std::string name() const override { return "fixed-" + std::to_string(slot_); }
  std::size_t select(const CandidateGroup& g, const EncodedGroup*, std::size_t) const override {
    if (slot_ >= g.size()) {
      throw ValidationError("fixed slot " + std::to_string(slot_) + " out of range for group '" + g.group_id + "'");
    }
    return slot_;
  }

 private:
  std::size_t slot_;
};

class RandomSelector final : public Selector {
 public:
  explicit RandomSelector(std::uint64_t seed) : seed_(seed) {}
  std::string name() const override { return "random"; }
  std::size_t select(const CandidateGroup& g, const EncodedGroup*, std::size_t index) const override {
    Rng rng = Rng(seed_).split(index);
    return static_cast<std::size_t>(rng.below(g.size()));
  }

 private:
  std::uint64_t seed_;
};

class OracleSelector final : public Selector {
 public:
  std::string name() const override { return "oracle"; }
  std::size_t select(const CandidateGroup& g, const EncodedGroup*, std::size_t) const override {
    std::vector<double> losses;
    for (const auto& c : g.candidates) {
      if (c.true_loss) losses.push_back(*c.true_loss);
      else if (c.loss) losses.push_back(*c.loss);
      else throw IncompleteGroupError("group '" + g.group_id + "' has a candidate without loss");
    }
    return argmin_lowest_index(losses);
  }
};

class ScoreSelector final : public Selector {
 public:
  ScoreSelector(std::string name, RankerParams params, bool minimize)
      : name_(std::move(name)), params_(std::move(params)), minimize_(minimize) {}
  std::string name() const override { return name_; }
  std::size_t select(const CandidateGroup& g, const EncodedGroup* enc, std::size_t) const override {
    require_trained(params_, name_);
    const auto scores = score_encoded(params_, require_encoded(enc, g, name_));
    return minimize_ ? argmin_lowest_index(scores) : argmax_lowest_index(scores);
  }

 private:
  std::string name_;
  RankerParams params_;
  bool minimize_;
};

class GateSelector final : public Selector {
 public:
  explicit GateSelector(GateParams gate) : gate_(std::move(gate)) {}
  std::string name() const override { return "gate"; }
  std::size_t select(const CandidateGroup& g, const EncodedGroup* enc, std::size_t) const override {
    if (gate_.model_dim == 0 || gate_.weight.empty()) throw StateError("gate selector used before training");
    const EncodedGroup& e = require_encoded(enc, g, "gate");
    std::vector<double> logits;
    for (std::size_t i = 0; i < e.size(); ++i) logits.push_back(gate_logit(gate_, e.visual[i], e.text[i]));
    return argmax_lowest_index(logits);
  }

 private:
  GateParams gate_;
};

class RetrievalSelector final : public Selector {
 public:
  RetrievalSelector(RankerParams params, std::shared_ptr<const InteractionWeights> w, RetrievalConfig cfg,
                    std::string name)
      : params_(std::move(params)), w_(std::move(w)), cfg_(cfg), name_(std::move(name)) {}
  std::string name() const override { return name_; }
  std::size_t select(const CandidateGroup& g, const EncodedGroup*, std::size_t) const override {
    require_trained(params_, name_);
    if (!w_) throw StateError(name_ + " selector needs interaction weights");
    return retrieve(g, params_, *w_, cfg_).selected;
  }

 private:
  RankerParams params_;
  std::shared_ptr<const InteractionWeights> w_;
  RetrievalConfig cfg_;
  std::string name_;
};

std::vector<double> pooled(const TokenMatrix& m) {
  const auto p = mean_pool(m);
  return {p.begin(), p.end()};
}

// Shared minibatch loop for the scorer-based baselines: item_fn adds the
// gradient of one item's loss (already divided by the batch size) into the
// slot and returns the loss.
using ItemFn = std::function<double(const RankerParams&, std::size_t, double, RankerGrads&)>;

RankerParams fit_scorer(const TrainConfig& cfg, std::size_t model_dim, std::size_t items, std::size_t batch,
                        const ItemFn& item_fn, std::size_t threads) {
  TrainingState state = init_training(cfg, model_dim);
  std::vector<RankerGrads> slots(batch, RankerGrads::zeros_like(state.params));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = Rng(cfg.seed).split(kShuffleStreamBase + epoch).permutation(items);
    for (std::size_t start = 0; start < items; start += batch) {
      const std::size_t end = std::min(items, start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      std::vector<double> losses(end - start);
      parallel_for(end - start, threads, [&](std::size_t k) {
        for (auto& t : slots[k].tensors) t.fill(0.0);
        losses[k] = item_fn(state.params, order[start + k], inv, slots[k]);
      });
      RankerGrads total = RankerGrads::zeros_like(state.params);
      for (std::size_t k = 0; k < end - start; ++k) {
        if (!std::isfinite(losses[k]) || !slots[k].all_finite()) {
          throw NonFiniteLossError("non-finite loss in epoch " + std::to_string(epoch + 1) + " at item " +
                                   std::to_string(order[start + k]));
        }
        total.add(slots[k]);
      }
      adam_step(state.params, state.optimizer, total, cfg);
    }
  }
  return state.params;
}

std::size_t group_batch(const TrainConfig& cfg, std::span<const CandidateGroup> groups) {
  const std::size_t n = groups.empty() ? 1 : std::max<std::size_t>(1, groups.front().size());
  return std::max<std::size_t>(1, cfg.batch_size / n);
}

void check_inputs(std::span<const CandidateGroup> groups, std::span<const EncodedGroup> encoded) {
  if (groups.empty()) throw ValidationError("training needs at least one group");
  if (groups.size() != encoded.size()) throw StateError("encoded features do not match the groups");
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (encoded[i].size() != groups[i].size()) throw StateError("encoded features do not match the groups");
  }
}

}  // namespace

double gate_logit(const GateParams& gate, const TokenMatrix& v_tilde, const TokenMatrix& t_tilde) {
  if (v_tilde.cols() != gate.model_dim || t_tilde.cols() != gate.model_dim) throw ShapeError("gate input width mismatch");
  const auto pv = pooled(v_tilde);
  const auto pt = pooled(t_tilde);
  double acc = 0.0;
  for (std::size_t i = 0; i < gate.model_dim; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < gate.model_dim; ++j) row += static_cast<double>(gate.weight(i, j)) * pt[j];
    acc += pv[i] * row;
  }
  return acc / std::sqrt(static_cast<double>(gate.model_dim));
}

std::unique_ptr<Selector> strategy_fixed(std::size_t slot) { return std::make_unique<FixedSelector>(slot); }
std::unique_ptr<Selector> strategy_random(std::uint64_t seed) { return std::make_unique<RandomSelector>(seed); }
std::unique_ptr<Selector> strategy_oracle() { return std::make_unique<OracleSelector>(); }
std::unique_ptr<Selector> strategy_pairwise(RankerParams params) {
  return std::make_unique<ScoreSelector>("pairwise", std::move(params), false);
}
std::unique_ptr<Selector> strategy_listwise(RankerParams params) {
  return std::make_unique<ScoreSelector>("listwise", std::move(params), false);
}
std::unique_ptr<Selector> strategy_regression(RankerParams params) {
  return std::make_unique<ScoreSelector>("regression", std::move(params), true);
}
std::unique_ptr<Selector> strategy_gate(GateParams gate) { return std::make_unique<GateSelector>(std::move(gate)); }
std::unique_ptr<Selector> strategy_retrieval(RankerParams params, std::shared_ptr<const InteractionWeights> w,
                                             RetrievalConfig cfg, std::string name) {
  cfg.validate();
  return std::make_unique<RetrievalSelector>(std::move(params), std::move(w), cfg, std::move(name));
}

double plackett_luce_nll(std::span<const double> scores, std::span<const std::size_t> order) {
  double nll = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t m = k; m < order.size(); ++m) mx = std::max(mx, scores[order[m]]);
    double z = 0.0;
    for (std::size_t m = k; m < order.size(); ++m) z += std::exp(scores[order[m]] - mx);
    nll += mx + std::log(z) - scores[order[k]];
  }
  return nll;
}

std::vector<double> plackett_luce_gradient(std::span<const double> scores, std::span<const std::size_t> order) {
  std::vector<double> grad(scores.size(), 0.0);
  for (std::size_t k = 0; k < order.size(); ++k) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t m = k; m < order.size(); ++m) mx = std::max(mx, scores[order[m]]);
    double z = 0.0;
    for (std::size_t m = k; m < order.size(); ++m) z += std::exp(scores[order[m]] - mx);
    for (std::size_t m = k; m < order.size(); ++m) grad[order[m]] += std::exp(scores[order[m]] - mx) / z;
    grad[order[k]] -= 1.0;
  }
  return grad;
}

RankerParams train_regression(std::span<const CandidateGroup> groups, std::span<const EncodedGroup> encoded,
                              const TrainConfig& cfg, std::size_t threads) {
  check_inputs(groups, encoded);
  std::vector<std::pair<std::size_t, std::size_t>> items;
  std::vector<double> targets;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto losses = observed(groups[g]);
    for (std::size_t c = 0; c < losses.size(); ++c) {
      items.emplace_back(g, c);
      targets.push_back(losses[c]);
    }
  }
  const ItemFn fn = [&](const RankerParams& p, std::size_t item, double inv, RankerGrads& grad) {
    const auto [g, c] = items[item];
    const ScoreResult r = score_features(p, encoded[g].visual[c], encoded[g].text[c]);
    const double err = r.score - targets[item];
    accumulate_score_gradient(p, r.tape, 2.0 * err * inv, grad);
    return err * err;
  };
  return fit_scorer(cfg, encoded.front().visual.front().cols(), items.size(), cfg.batch_size, fn, threads);
}

RankerParams train_listwise(std::span<const CandidateGroup> groups, std::span<const EncodedGroup> encoded,
                            const TrainConfig& cfg, std::size_t threads) {
  check_inputs(groups, encoded);
  std::vector<std::vector<std::size_t>> orders;
  for (std::size_t g = 0; g < groups.size(); ++g) orders.push_back(rank_group(groups[g], g).order());
  const ItemFn fn = [&](const RankerParams& p, std::size_t g, double inv, RankerGrads& grad) {
    std::vector<ScoreResult> results;
    std::vector<double> scores;
    for (std::size_t c = 0; c < encoded[g].size(); ++c) {
      results.push_back(score_features(p, encoded[g].visual[c], encoded[g].text[c]));
      scores.push_back(results.back().score);
    }
    const auto dscore = plackett_luce_gradient(scores, orders[g]);
    for (std::size_t c = 0; c < results.size(); ++c) accumulate_score_gradient(p, results[c].tape, dscore[c] * inv, grad);
    return plackett_luce_nll(scores, orders[g]);
  };
  return fit_scorer(cfg, encoded.front().visual.front().cols(), groups.size(), group_batch(cfg, groups), fn,
                    threads);
}

GateParams train_gate(std::span<const CandidateGroup> groups, std::span<const EncodedGroup> encoded,
                      const TrainConfig& cfg, double temperature_start, double temperature_end, std::size_t threads) {
  check_inputs(groups, encoded);
  cfg.validate();
  if (!(temperature_start > 0.0) || !(temperature_end > 0.0)) throw ValidationError("gate temperatures must be > 0");
  const std::size_t d = encoded.front().visual.front().cols();
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));

  // Pooled features are constant during training.
  std::vector<std::vector<std::vector<double>>> pv(groups.size()), pt(groups.size());
  std::vector<std::vector<double>> losses(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    losses[g] = observed(groups[g]);
    for (std::size_t c = 0; c < encoded[g].size(); ++c) {
      pv[g].push_back(pooled(encoded[g].visual[c]));
      pt[g].push_back(pooled(encoded[g].text[c]));
    }
  }

  GateParams gate;
  gate.model_dim = d;
  gate.weight = TokenMatrix(d, d);
  Rng init = Rng(cfg.seed).split(kInitStream);
  for (float& v : gate.weight.data()) v = static_cast<float>(init.uniform(-inv_sqrt_d, inv_sqrt_d));
  TokenMatrix m(d, d), v(d, d);
  std::uint64_t step = 0;

  const std::size_t batch = group_batch(cfg, groups);
  std::vector<MatrixD> slots(batch, MatrixD(d, d));
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double frac = cfg.epochs > 1 ? static_cast<double>(epoch) / static_cast<double>(cfg.epochs - 1) : 1.0;
    const double tau = temperature_start + (temperature_end - temperature_start) * frac;
    const auto order = Rng(cfg.seed).split(kShuffleStreamBase + epoch).permutation(groups.size());
    const Rng noise_parent = Rng(cfg.seed).split(kGumbelStreamBase + epoch);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      parallel_for(end - start, threads, [&](std::size_t k) {
        const std::size_t g = order[start + k];
        MatrixD& slot = slots[k];
        slot.fill(0.0);
        Rng noise = noise_parent.split(g);
        const std::size_t n = losses[g].size();
        std::vector<double> z(n);
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < n; ++c) {
          double u;
          do {
            u = noise.uniform();
          } while (u <= 0.0);
          const double gumbel = -std::log(-std::log(u));
          double logit = 0.0;
          for (std::size_t i = 0; i < d; ++i) {
            double row = 0.0;
            for (std::size_t j = 0; j < d; ++j) row += static_cast<double>(gate.weight(i, j)) * pt[g][c][j];
            logit += pv[g][c][i] * row;
          }
          z[c] = (logit * inv_sqrt_d + gumbel) / tau;
          mx = std::max(mx, z[c]);
        }
        double sum = 0.0;
        for (double& e : z) {
          e = std::exp(e - mx);
          sum += e;
        }
        double expected = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          z[c] /= sum;
          expected += z[c] * losses[g][c];
        }
        for (std::size_t c = 0; c < n; ++c) {
          const double dlogit = z[c] * (losses[g][c] - expected) / tau * inv * inv_sqrt_d;
          for (std::size_t i = 0; i < d; ++i) {
            const double a = dlogit * pv[g][c][i];
            for (std::size_t j = 0; j < d; ++j) slot(i, j) += a * pt[g][c][j];
          }
        }
      });
      MatrixD total(d, d);
      for (std::size_t k = 0; k < end - start; ++k)
        for (std::size_t i = 0; i < total.size(); ++i) total.data()[i] += slots[k].data()[i];
      step += 1;
      TokenMatrix* params[] = {&gate.weight};
      adam_update(params, std::span<TokenMatrix>(&m, 1), std::span<TokenMatrix>(&v, 1),
                  std::span<const MatrixD>(&total, 1), step, cfg);
    }
  }
  return gate;
}

}  // namespace autov
