#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "autov/matrix.hpp"
#include "autov/rng.hpp"

namespace autov {

// Frozen single decoder layer over the sequence [visual; text]:
//   x = x + MHA(rmsnorm(x) * g_attn)          causal mask, no positions
//   x = x + silu(rmsnorm(x) * g_ffn W_up + b_up) W_down + b_down
// Matrices act on row vectors (x W). The weights have no mutating API; the
// only ways to obtain them are seeding, loading, or from_tensors.
class InteractionWeights {
 public:
  static constexpr double kNormEps = 1e-6;

  static InteractionWeights from_tensors(std::size_t heads, TokenMatrix attn_norm, TokenMatrix wq, TokenMatrix wk,
                                         TokenMatrix wv, TokenMatrix wo, TokenMatrix ffn_norm, TokenMatrix w_up,
                                         TokenMatrix b_up, TokenMatrix w_down, TokenMatrix b_down);

  std::size_t model_dim() const noexcept { return model_dim_; }
  std::size_t heads() const noexcept { return heads_; }
  std::size_t head_dim() const noexcept { return model_dim_ / heads_; }
  std::size_t ff_dim() const noexcept { return ff_dim_; }

  const TokenMatrix& attn_norm() const noexcept { return attn_norm_; }
  const TokenMatrix& wq() const noexcept { return wq_; }
  const TokenMatrix& wk() const noexcept { return wk_; }
  const TokenMatrix& wv() const noexcept { return wv_; }
  const TokenMatrix& wo() const noexcept { return wo_; }
  const TokenMatrix& ffn_norm() const noexcept { return ffn_norm_; }
  const TokenMatrix& w_up() const noexcept { return w_up_; }
  const TokenMatrix& b_up() const noexcept { return b_up_; }
  const TokenMatrix& w_down() const noexcept { return w_down_; }
  const TokenMatrix& b_down() const noexcept { return b_down_; }

  // FNV-1a over every tensor's bytes; used to assert the weights stay frozen.
  std::uint64_t fingerprint() const;

  bool operator==(const InteractionWeights&) const = default;

 private:
  InteractionWeights() = default;

  std::size_t model_dim_ = 0;
  std::size_t heads_ = 0;
  std::size_t ff_dim_ = 0;
  TokenMatrix attn_norm_, wq_, wk_, wv_, wo_, ffn_norm_, w_up_, b_up_, w_down_, b_down_;
};

struct InteractionOutput {
  TokenMatrix visual;  // l_v x D
  TokenMatrix text;    // l_t x D, this candidate's text slice
};

// Gains are ones; every other tensor is drawn from uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)),
// with the output projections (wo, w_down, b_down) further scaled by 1/sqrt(2).
InteractionWeights seed_interaction_weights(Rng& rng, std::size_t model_dim, std::size_t heads, std::size_t ff_dim);

void save_interaction_weights(const InteractionWeights& w, const std::filesystem::path& path);
InteractionWeights load_interaction_weights(const std::filesystem::path& path);

InteractionOutput interact(const InteractionWeights& w, const TokenMatrix& visual, const TokenMatrix& text);

enum class TextAggregation { mean, product, per_candidate };

std::string_view text_aggregation_name(TextAggregation a);
TextAggregation parse_text_aggregation(std::string_view name);

// Combines per-candidate text slices: elementwise mean, or elementwise
// product. per_candidate has no single aggregate and raises StateError.
TokenMatrix aggregate_text(std::span<const TokenMatrix> slices, TextAggregation mode = TextAggregation::mean);

// The text matrix each candidate is scored against: the aggregate for mean
// and product, the candidate's own slice for per_candidate.
std::vector<TokenMatrix> text_for_candidates(std::span<const TokenMatrix> slices, TextAggregation mode);

// Interaction outputs for one group: per candidate the interacted visual
// tokens and the text matrix it is scored against.
struct EncodedGroup {
  std::vector<TokenMatrix> visual;
  std::vector<TokenMatrix> text;

  std::size_t size() const noexcept { return visual.size(); }
};

EncodedGroup encode_group(const InteractionWeights& w, const TokenMatrix& query, std::span<const TokenMatrix> visuals,
                          TextAggregation mode = TextAggregation::mean);

}  // namespace autov
