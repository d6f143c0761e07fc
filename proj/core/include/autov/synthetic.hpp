#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "autov/dataset.hpp"
#include "autov/matrix.hpp"

namespace autov {

// Planted-truth benchmark. Every group lives in a latent subspace of
// dimension latent_dim, embedded into D by a scaled orthonormal map U. In
// latent coordinates:
//   query topic   z = mu + topic_noise * e
//   query tokens  [anchor; z + query_jitter * e; ...]     (anchor shared by all groups, A * anchor = 0)
//   relevance     w = A * mean(query tokens)              A = G G^T / h_true, rank h_true
//   prompt        p_i = s_i (1 - d_i) mu + prompt_spread * u_i + distortion_gain * d_i * q_i
//                 with q_i orthogonal to w, d_i = U(0,1)^distortion_power * (1 + slot_skew * i / (n - 1)),
//                 s_i ~ U(strength_min, strength_max)
//   tokens        V_i,r = (b_r + prompt_gain * p_i + token_jitter * e) / sqrt(1 + prompt_gain^2) + visual_offset * o
//                 with o a fixed direction, A * o = 0
// The hidden map M (D x D) satisfies <pool(V) U, M pool(T) U> = alignment_scale * pool(V)^T A pool(T)
// in latent terms, and the true loss of a candidate is softplus(-<pool(V_i), M pool(T)>).
// Observed losses add noise_std * N(0, 1) and are clamped at zero.
struct SyntheticConfig {
  std::size_t model_dim = 64;
  std::size_t h_true = 4;
  std::size_t visual_tokens = 8;
  std::size_t text_tokens = 4;
  std::size_t pool_size = 4;
  std::size_t train_groups = 2000;
  std::size_t test_groups = 500;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  std::size_t latent_dim = 8;
  double prompt_gain = 4.0;
  double prompt_spread = 0.05;
  double topic_noise = 0.3;
  double query_jitter = 0.1;
  double token_jitter = 0.1;
  double alignment_scale = 0.5;
  double distortion_power = 2.0;
  double distortion_gain = 2.0;
  double strength_min = 0.75;
  double strength_max = 1.25;
  double visual_offset = 2.5;
  double slot_skew = 0.0;
  // Fraction of groups that receive one candidate drawn from the subspace
  // orthogonal to the latent one.
  double outlier_fraction = 0.0;

  void validate() const;
};

struct SyntheticSplit {
  Dataset data;
  std::vector<std::optional<std::size_t>> outlier;  // planted outlier slot per group
};

struct SyntheticBenchmark {
  SyntheticConfig config;
  MatrixD planted;  // M, D x D
  SyntheticSplit train;
  SyntheticSplit test;
};

SyntheticBenchmark generate_synthetic(const SyntheticConfig& cfg);

// <pool(V), M pool(T)>
double planted_alignment(const MatrixD& planted, const TokenMatrix& visual, const TokenMatrix& query);
// softplus(-alignment)
double planted_loss(const MatrixD& planted, const TokenMatrix& visual, const TokenMatrix& query);

// Keeps the first n candidates of every group (nested pools).
std::vector<CandidateGroup> truncate_pools(std::span<const CandidateGroup> groups, std::size_t n);

}  // namespace autov
