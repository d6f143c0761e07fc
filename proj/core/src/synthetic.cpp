#include "autov/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "autov/error.hpp"
#include "autov/rng.hpp"
#include "autov/training.hpp"

namespace autov {

namespace {

constexpr std::uint64_t kStructureStream = 0;
constexpr std::uint64_t kTrainStream = 1;
constexpr std::uint64_t kTestStream = 2;

using Vec = std::vector<double>;

Vec gaussian(Rng& rng, std::size_t n) {
  Vec v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

struct Structure {
  MatrixD embed;   // k x D, rows orthogonal with squared norm D / k
  MatrixD a;       // k x k planted latent map
  MatrixD planted; // D x D
  Vec anchor;      // k, A * anchor = 0
  Vec offset;      // k, A * offset = 0, shared by every visual token
};

Structure make_structure(const SyntheticConfig& cfg) {
  Rng rng = Rng(cfg.seed).split(kStructureStream);
  const std::size_t k = cfg.latent_dim, d = cfg.model_dim;
  Structure s;
  // Gram-Schmidt on Gaussian rows gives an orthonormal k x D basis.
  s.embed = MatrixD(k, d);
  for (std::size_t r = 0; r < k; ++r) {
    Vec v = gaussian(rng, d);
    for (std::size_t q = 0; q < r; ++q) {
      double proj = 0.0;
      for (std::size_t c = 0; c < d; ++c) proj += v[c] * s.embed(q, c);
      for (std::size_t c = 0; c < d; ++c) v[c] -= proj * s.embed(q, c);
    }
    const double norm = std::sqrt(dot(v, v));
    for (std::size_t c = 0; c < d; ++c) s.embed(r, c) = v[c] / norm;
  }
  MatrixD g(k, cfg.h_true);
  for (double& v : g.data()) v = rng.normal();
  s.a = matmul_nt(g, g);
  for (double& v : s.a.data()) v /= static_cast<double>(cfg.h_true);
  // The anchor and the visual offset lie in the null space of A, so they carry no relevance.
  s.anchor = gaussian(rng, k);
  std::vector<Vec> cols;
  for (std::size_t c = 0; c < cfg.h_true; ++c) {
    Vec v(k);
    for (std::size_t r = 0; r < k; ++r) v[r] = g(r, c);
    for (const Vec& q : cols) {
      const double proj = dot(v, q);
      for (std::size_t r = 0; r < k; ++r) v[r] -= proj * q[r];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm > 1e-12) {
      for (double& x : v) x /= norm;
      cols.push_back(std::move(v));
    }
  }
  auto to_null_space = [&](Vec v) {
    for (const Vec& q : cols) {
      const double proj = dot(v, q);
      for (std::size_t r = 0; r < k; ++r) v[r] -= proj * q[r];
    }
    const double norm = std::sqrt(dot(v, v));
    if (norm > 1e-12) {
      for (double& x : v) x *= std::sqrt(static_cast<double>(k)) / norm;
    }
    return v;
  };
  s.anchor = to_null_space(std::move(s.anchor));
  s.offset = to_null_space(gaussian(rng, k));

  // Tokens are embedded with U = sqrt(D/k) E, so planted = alignment_scale *
  // E^T A E / (D/k) reproduces alignment_scale * a^T A b on latent vectors.
  const double scale = std::sqrt(static_cast<double>(d) / static_cast<double>(k));
  const MatrixD au = matmul(s.a, s.embed);
  s.planted = matmul_tn(s.embed, au);
  for (double& v : s.planted.data()) v *= cfg.alignment_scale / (scale * scale);
  for (double& v : s.embed.data()) v *= scale;
  return s;
}

TokenMatrix embed_rows(const std::vector<Vec>& rows, const MatrixD& embed) {
  const std::size_t d = embed.cols();
  TokenMatrix out(rows.size(), d);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      double acc = 0.0;
      for (std::size_t q = 0; q < rows[r].size(); ++q) acc += rows[r][q] * embed(q, c);
      out(r, c) = static_cast<float>(acc);
    }
  }
  return out;
}

// Gaussian tokens confined to the orthogonal complement of the latent subspace.
TokenMatrix orthogonal_tokens(Rng& rng, const SyntheticConfig& cfg, const MatrixD& embed) {
  const std::size_t d = cfg.model_dim, k = cfg.latent_dim;
  const double basis_sq = static_cast<double>(d) / static_cast<double>(k);
  TokenMatrix out(cfg.visual_tokens, d);
  for (std::size_t r = 0; r < cfg.visual_tokens; ++r) {
    Vec v = gaussian(rng, d);
    for (std::size_t q = 0; q < k; ++q) {
      double proj = 0.0;
      for (std::size_t c = 0; c < d; ++c) proj += v[c] * embed(q, c);
      for (std::size_t c = 0; c < d; ++c) v[c] -= proj * embed(q, c) / basis_sq;
    }
    for (std::size_t c = 0; c < d; ++c) out(r, c) = static_cast<float>(v[c]);
  }
  return out;
}

CandidateGroup make_group(const SyntheticConfig& cfg, const Structure& s, Rng rng, const std::string& gid,
                          std::optional<std::size_t>& outlier_slot) {
  const std::size_t k = cfg.latent_dim, n = cfg.pool_size;
  const Vec mu = gaussian(rng, k);
  Vec z = gaussian(rng, k);
  for (std::size_t i = 0; i < k; ++i) z[i] = mu[i] + cfg.topic_noise * z[i];

  std::vector<Vec> query(cfg.text_tokens, Vec(k));
  query[0] = s.anchor;
  for (std::size_t t = 1; t < cfg.text_tokens; ++t)
    for (std::size_t i = 0; i < k; ++i) query[t][i] = z[i] + cfg.query_jitter * rng.normal();
  Vec tbar(k, 0.0);
  for (const auto& row : query)
    for (std::size_t i = 0; i < k; ++i) tbar[i] += row[i] / static_cast<double>(cfg.text_tokens);
  Vec w(k, 0.0);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j) w[i] += s.a(i, j) * tbar[j];
  const double wnorm = std::sqrt(dot(w, w));

  std::vector<Vec> base(cfg.visual_tokens);
  for (auto& b : base) b = gaussian(rng, k);

  CandidateGroup g;
  g.group_id = gid;
  g.query = embed_rows(query, s.embed);

  outlier_slot.reset();
  if (cfg.outlier_fraction > 0.0 && rng.uniform() < cfg.outlier_fraction) outlier_slot = rng.below(n);

  const double norm = std::sqrt(1.0 + cfg.prompt_gain * cfg.prompt_gain);
  for (std::size_t c = 0; c < n; ++c) {
    const double skew = n > 1 ? 1.0 + cfg.slot_skew * static_cast<double>(c) / static_cast<double>(n - 1) : 1.0;
    const double dist = std::pow(rng.uniform(), cfg.distortion_power) * skew;
    const double strength = rng.uniform(cfg.strength_min, cfg.strength_max);
    const Vec u = gaussian(rng, k);
    Vec q = gaussian(rng, k);
    if (wnorm > 0.0) {
      const double proj = dot(q, w) / (wnorm * wnorm);
      for (std::size_t i = 0; i < k; ++i) q[i] -= proj * w[i];
    }
    Vec p(k);
    for (std::size_t i = 0; i < k; ++i)
      p[i] = strength * (1.0 - dist) * mu[i] + cfg.prompt_spread * u[i] + cfg.distortion_gain * dist * q[i];

    std::vector<Vec> rows(cfg.visual_tokens, Vec(k));
    for (std::size_t r = 0; r < cfg.visual_tokens; ++r)
      for (std::size_t i = 0; i < k; ++i)
        rows[r][i] = (base[r][i] + cfg.prompt_gain * p[i] + cfg.token_jitter * rng.normal()) / norm +
                     cfg.visual_offset * s.offset[i];

    Candidate cand;
    cand.id = "c" + std::to_string(c);
    cand.visual = (outlier_slot && *outlier_slot == c) ? orthogonal_tokens(rng, cfg, s.embed) : embed_rows(rows, s.embed);
    g.candidates.push_back(std::move(cand));
  }
  for (auto& cand : g.candidates) {
    const double truth = planted_loss(s.planted, cand.visual, g.query);
    cand.true_loss = truth;
    cand.loss = cfg.noise_std > 0.0 ? std::max(0.0, truth + cfg.noise_std * rng.normal()) : truth;
  }
  return g;
}

SyntheticSplit make_split(const SyntheticConfig& cfg, const Structure& s, std::uint64_t stream, std::size_t count,
                          const char* prefix) {
  SyntheticSplit split;
  split.data.dims = {cfg.model_dim, cfg.visual_tokens, cfg.text_tokens};
  split.outlier.resize(count);
  const Rng parent = Rng(cfg.seed).split(stream);
  char gid[48];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(gid, sizeof gid, "%s-%06zu", prefix, i);
    split.data.groups.push_back(make_group(cfg, s, parent.split(i), gid, split.outlier[i]));
  }
  return split;
}

}  // namespace

void SyntheticConfig::validate() const {
  if (model_dim == 0 || visual_tokens == 0 || text_tokens == 0) throw ValidationError("synthetic dims must be positive");
  if (text_tokens < 2) throw ValidationError("synthetic queries need at least two tokens (anchor plus topic)");
  if (pool_size < 1) throw ValidationError("pool size must be >= 1");
  if (latent_dim == 0 || latent_dim > model_dim) throw ValidationError("latent_dim must be in [1, D]");
  if (h_true == 0 || h_true > latent_dim) throw ValidationError("h_true must be in [1, latent_dim]");
  if (!(noise_std >= 0.0)) throw ValidationError("noise_std must be >= 0");
  if (!(strength_min <= strength_max)) throw ValidationError("strength_min must not exceed strength_max");
  if (!(distortion_power > 0.0)) throw ValidationError("distortion_power must be > 0");
  if (!(distortion_gain >= 0.0)) throw ValidationError("distortion_gain must be >= 0");
  if (!(visual_offset >= 0.0)) throw ValidationError("visual_offset must be >= 0");
  if (!(outlier_fraction >= 0.0 && outlier_fraction <= 1.0)) throw ValidationError("outlier_fraction must be in [0, 1]");
  if (outlier_fraction > 0.0 && latent_dim == model_dim) {
    throw ValidationError("planted outliers need latent_dim < D");
  }
}

SyntheticBenchmark generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const Structure s = make_structure(cfg);
  SyntheticBenchmark b;
  b.config = cfg;
  b.planted = s.planted;
  b.train = make_split(cfg, s, kTrainStream, cfg.train_groups, "train");
  b.test = make_split(cfg, s, kTestStream, cfg.test_groups, "test");
  return b;
}

double planted_alignment(const MatrixD& planted, const TokenMatrix& visual, const TokenMatrix& query) {
  if (planted.rows() != visual.cols() || planted.cols() != query.cols()) {
    throw ShapeError("planted map " + planted.shape_string() + " does not fit tokens " + visual.shape_string() +
                     " and " + query.shape_string());
  }
  const auto pv = mean_pool(visual.cast<double>());
  const auto pt = mean_pool(query.cast<double>());
  double acc = 0.0;
  for (std::size_t i = 0; i < planted.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < planted.cols(); ++j) row += planted(i, j) * pt[j];
    acc += pv[i] * row;
  }
  return acc;
}

double planted_loss(const MatrixD& planted, const TokenMatrix& visual, const TokenMatrix& query) {
  return softplus(-planted_alignment(planted, visual, query));
}

std::vector<CandidateGroup> truncate_pools(std::span<const CandidateGroup> groups, std::size_t n) {
  std::vector<CandidateGroup> out;
  out.reserve(groups.size());
  for (const auto& g : groups) {
    if (g.size() < n) throw ValidationError("group '" + g.group_id + "' has fewer than " + std::to_string(n) + " candidates");
    CandidateGroup t;
    t.group_id = g.group_id;
    t.query = g.query;
    t.candidates.assign(g.candidates.begin(), g.candidates.begin() + static_cast<std::ptrdiff_t>(n));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace autov
