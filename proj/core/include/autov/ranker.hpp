#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>

#include "autov/interaction.hpp"
#include "autov/matrix.hpp"
#include "autov/rng.hpp"

namespace autov {

// attended_mean: s = mean(softmax(V' T'^T / sqrt(h)) T')
// logit_mean:    s = mean(V' T'^T / sqrt(h))
enum class ScoreReduction { attended_mean, logit_mean };

std::string_view score_reduction_name(ScoreReduction r);
ScoreReduction parse_score_reduction(std::string_view name);

struct RankerConfig {
  Activation activation = Activation::relu;
  ScoreReduction reduction = ScoreReduction::attended_mean;

  bool operator==(const RankerConfig&) const = default;
};

// Two mapping FFNs, D -> h -> h, each with per-layer biases. Weight matrices
// act on row vectors; biases are 1 x h.
struct RankerParams {
  static constexpr std::size_t kTensorCount = 8;
  static constexpr std::array<std::string_view, kTensorCount> kTensorNames = {
      "w1_v", "b1_v", "w2_v", "b2_v", "w1_t", "b1_t", "w2_t", "b2_t"};

  std::size_t model_dim = 0;
  std::size_t hidden_dim = 0;
  RankerConfig config;
  TokenMatrix w1_v, b1_v, w2_v, b2_v;
  TokenMatrix w1_t, b1_t, w2_t, b2_t;

  static RankerParams zeros(std::size_t model_dim, std::size_t hidden_dim, RankerConfig config = {});
  // Weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
  static RankerParams initialize(Rng& rng, std::size_t model_dim, std::size_t hidden_dim, RankerConfig config = {});

  std::size_t parameter_count() const;
  std::array<TokenMatrix*, kTensorCount> tensors();
  std::array<const TokenMatrix*, kTensorCount> tensors() const;
  void validate() const;
  std::uint64_t checksum() const;

  bool operator==(const RankerParams&) const = default;
};

struct RankerGrads {
  std::array<MatrixD, RankerParams::kTensorCount> tensors;

  static RankerGrads zeros_like(const RankerParams& p);
  void add(const RankerGrads& other);
  void scale(double factor);
  bool all_finite() const;
};

struct FfnTape {
  MatrixD input;   // rows x D
  MatrixD pre;     // rows x h, before the activation
  MatrixD hidden;  // rows x h, after the activation
  MatrixD output;  // rows x h
};

struct ScoreTape {
  std::size_t model_dim = 0;
  std::size_t hidden_dim = 0;
  RankerConfig config;
  std::uint64_t params_checksum = 0;
  bool has_mapping = false;  // false when scored from already-mapped tokens
  FfnTape vision;
  FfnTape text;
  MatrixD v_prime;    // l_v x h
  MatrixD t_prime;    // l_t x h
  MatrixD attention;  // l_v x l_t
  MatrixD attended;   // l_v x h
  double score = 0.0;
};

struct ScoreResult {
  double score = 0.0;
  ScoreTape tape;
};

TokenMatrix map_vision(const RankerParams& p, const TokenMatrix& v_tilde);
TokenMatrix map_text(const RankerParams& p, const TokenMatrix& t_tilde);

// Scores already-mapped tokens. The tape supports inspection but not
// backward, which needs the mapping intermediates.
ScoreResult score(const RankerParams& p, const TokenMatrix& v_prime, const TokenMatrix& t_prime);

// Maps interacted tokens through both FFNs and scores them, keeping every
// intermediate needed for backward.
ScoreResult score_features(const RankerParams& p, const TokenMatrix& v_tilde, const TokenMatrix& t_tilde);

// End to end: interaction on (visual, query), then score_features against the
// supplied aggregated text. The interaction output is a constant.
ScoreResult score_candidate(const RankerParams& p, const InteractionWeights& w, const TokenMatrix& visual,
                            const TokenMatrix& query, const TokenMatrix& text_agg);

// Adds dscore * d(score)/d(params) into grads.
void accumulate_score_gradient(const RankerParams& p, const ScoreTape& tape, double dscore, RankerGrads& grads);

// Gradient of upstream * softplus(-(s_c - s_r)) through both branches.
RankerGrads backward(const RankerParams& p, const ScoreTape& tape_chosen, const ScoreTape& tape_rejected,
                     double upstream = 1.0);

void save_ranker(const RankerParams& p, const std::filesystem::path& path);
RankerParams load_ranker(const std::filesystem::path& path);

}  // namespace autov
