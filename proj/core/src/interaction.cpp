#include "autov/interaction.hpp"

#include <bit>
#include <cmath>
#include <limits>

#include "autov/error.hpp"
#include "bundle.hpp"

namespace autov {

namespace {

constexpr std::string_view kKind = "interaction";
constexpr int kVersion = 1;

void require_shape(const TokenMatrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string("interaction tensor '") + name + "' is " + m.shape_string() + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (!m.all_finite()) throw ShapeError(std::string("interaction tensor '") + name + "' has non-finite entries");
}

TokenMatrix uniform_matrix(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  TokenMatrix m(rows, cols);
  for (float& v : m.data()) v = static_cast<float>(rng.uniform(-bound, bound));
  return m;
}

MatrixD rms_norm(const MatrixD& x, const TokenMatrix& gain) {
  MatrixD y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) ss += x(i, j) * x(i, j);
    const double inv = 1.0 / std::sqrt(ss / static_cast<double>(x.cols()) + InteractionWeights::kNormEps);
    for (std::size_t j = 0; j < x.cols(); ++j) y(i, j) = x(i, j) * inv * gain(0, j);
  }
  return y;
}

double silu(double v) { return v / (1.0 + std::exp(-v)); }

void fnv_mix(std::uint64_t& h, const TokenMatrix& m) {
  for (float v : m.data()) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) {
      h ^= (bits >> (8 * b)) & 0xFFu;
      h *= 0x100000001B3ULL;
    }
  }
}

}  // namespace

InteractionWeights InteractionWeights::from_tensors(std::size_t heads, TokenMatrix attn_norm, TokenMatrix wq,
                                                    TokenMatrix wk, TokenMatrix wv, TokenMatrix wo,
                                                    TokenMatrix ffn_norm, TokenMatrix w_up, TokenMatrix b_up,
                                                    TokenMatrix w_down, TokenMatrix b_down) {
  const std::size_t d = wq.rows();
  const std::size_t ff = w_up.cols();
  if (d == 0 || ff == 0) throw ShapeError("interaction weights need positive dimensions");
  if (heads == 0 || d % heads != 0) {
    throw ShapeError("head count " + std::to_string(heads) + " does not divide model dimension " + std::to_string(d));
  }
  require_shape(attn_norm, 1, d, "attn_norm");
  require_shape(wq, d, d, "wq");
  require_shape(wk, d, d, "wk");
  require_shape(wv, d, d, "wv");
  require_shape(wo, d, d, "wo");
  require_shape(ffn_norm, 1, d, "ffn_norm");
  require_shape(w_up, d, ff, "w_up");
  require_shape(b_up, 1, ff, "b_up");
  require_shape(w_down, ff, d, "w_down");
  require_shape(b_down, 1, d, "b_down");

  InteractionWeights w;
  w.model_dim_ = d;
  w.heads_ = heads;
  w.ff_dim_ = ff;
  w.attn_norm_ = std::move(attn_norm);
  w.wq_ = std::move(wq);
  w.wk_ = std::move(wk);
  w.wv_ = std::move(wv);
  w.wo_ = std::move(wo);
  w.ffn_norm_ = std::move(ffn_norm);
  w.w_up_ = std::move(w_up);
  w.b_up_ = std::move(b_up);
  w.w_down_ = std::move(w_down);
  w.b_down_ = std::move(b_down);
  return w;
}

std::uint64_t InteractionWeights::fingerprint() const {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const TokenMatrix* m : {&attn_norm_, &wq_, &wk_, &wv_, &wo_, &ffn_norm_, &w_up_, &b_up_, &w_down_, &b_down_})
    fnv_mix(h, *m);
  return h;
}

InteractionWeights seed_interaction_weights(Rng& rng, std::size_t model_dim, std::size_t heads, std::size_t ff_dim) {
  if (model_dim == 0 || ff_dim == 0) throw ShapeError("interaction dimensions must be positive");
  if (heads == 0 || model_dim % heads != 0) {
    throw ShapeError("head count " + std::to_string(heads) + " does not divide model dimension " +
                     std::to_string(model_dim));
  }
  const double in_bound = 1.0 / std::sqrt(static_cast<double>(model_dim));
  const double ff_bound = 1.0 / std::sqrt(static_cast<double>(ff_dim));
  // Projections that write into the residual stream are scaled down by sqrt(2).
  const double residual = 1.0 / std::sqrt(2.0);
  auto wq = uniform_matrix(rng, model_dim, model_dim, in_bound);
  auto wk = uniform_matrix(rng, model_dim, model_dim, in_bound);
  auto wv = uniform_matrix(rng, model_dim, model_dim, in_bound);
  auto wo = uniform_matrix(rng, model_dim, model_dim, in_bound * residual);
  auto w_up = uniform_matrix(rng, model_dim, ff_dim, in_bound);
  auto b_up = uniform_matrix(rng, 1, ff_dim, in_bound);
  auto w_down = uniform_matrix(rng, ff_dim, model_dim, ff_bound * residual);
  auto b_down = uniform_matrix(rng, 1, model_dim, ff_bound * residual);
  return InteractionWeights::from_tensors(heads, TokenMatrix(1, model_dim, 1.0f), std::move(wq), std::move(wk),
                                          std::move(wv), std::move(wo), TokenMatrix(1, model_dim, 1.0f),
                                          std::move(w_up), std::move(b_up), std::move(w_down), std::move(b_down));
}

void save_interaction_weights(const InteractionWeights& w, const std::filesystem::path& path) {
  const nlohmann::json meta = {{"D", w.model_dim()},
                               {"heads", w.heads()},
                               {"d_ff", w.ff_dim()},
                               {"ffn", "silu"},
                               {"norm", "rms"},
                               {"norm_eps", InteractionWeights::kNormEps}};
  const detail::NamedTensor tensors[] = {
      {"attn_norm", w.attn_norm()}, {"wq", w.wq()},         {"wk", w.wk()},
      {"wv", w.wv()},               {"wo", w.wo()},         {"ffn_norm", w.ffn_norm()},
      {"w_up", w.w_up()},           {"b_up", w.b_up()},     {"w_down", w.w_down()},
      {"b_down", w.b_down()}};
  detail::write_bundle(path, kKind, kVersion, meta, tensors);
}

InteractionWeights load_interaction_weights(const std::filesystem::path& path) {
  const detail::Bundle b = detail::read_bundle(path, kKind, kVersion);
  const auto d = detail::meta_field<std::size_t>(b.meta, "D");
  const auto heads = detail::meta_field<std::size_t>(b.meta, "heads");
  const auto ff = detail::meta_field<std::size_t>(b.meta, "d_ff");
  const auto ffn = detail::meta_field<std::string>(b.meta, "ffn");
  if (ffn != "silu") throw FormatError("unsupported interaction feed-forward '" + ffn + "'");
  try {
    InteractionWeights w = InteractionWeights::from_tensors(
        heads, b.get("attn_norm"), b.get("wq"), b.get("wk"), b.get("wv"), b.get("wo"), b.get("ffn_norm"),
        b.get("w_up"), b.get("b_up"), b.get("w_down"), b.get("b_down"));
    if (w.model_dim() != d || w.ff_dim() != ff) throw FormatError("interaction header dims disagree with tensors");
    return w;
  } catch (const ShapeError& e) {
    throw FormatError(std::string("invalid interaction checkpoint: ") + e.what());
  }
}

InteractionOutput interact(const InteractionWeights& w, const TokenMatrix& visual, const TokenMatrix& text) {
  const std::size_t d = w.model_dim();
  if (visual.cols() != d || text.cols() != d) {
    throw ShapeError("interact expects " + std::to_string(d) + " columns, got visual " + visual.shape_string() +
                     " and text " + text.shape_string());
  }
  const std::size_t lv = visual.rows();
  const std::size_t len = lv + text.rows();

  MatrixD x(len, d);
  for (std::size_t i = 0; i < lv; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) = visual(i, j);
  for (std::size_t i = 0; i < text.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) x(lv + i, j) = text(i, j);

  const MatrixD y = rms_norm(x, w.attn_norm());
  const MatrixD q = matmul(y, w.wq().cast<double>());
  const MatrixD k = matmul(y, w.wk().cast<double>());
  const MatrixD v = matmul(y, w.wv().cast<double>());

  const std::size_t hd = w.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  MatrixD attended(len, d);
  std::vector<double> logits(len);
  for (std::size_t head = 0; head < w.heads(); ++head) {
    const std::size_t off = head * hd;
    for (std::size_t i = 0; i < len; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j <= i; ++j) {
        double s = 0.0;
        for (std::size_t c = 0; c < hd; ++c) s += q(i, off + c) * k(j, off + c);
        logits[j] = s * scale;
        mx = std::max(mx, logits[j]);
      }
      double z = 0.0;
      for (std::size_t j = 0; j <= i; ++j) {
        logits[j] = std::exp(logits[j] - mx);
        z += logits[j];
      }
      for (std::size_t j = 0; j <= i; ++j) {
        const double p = logits[j] / z;
        for (std::size_t c = 0; c < hd; ++c) attended(i, off + c) += p * v(j, off + c);
      }
    }
  }
  const MatrixD proj = matmul(attended, w.wo().cast<double>());
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += proj.data()[i];

  MatrixD up = matmul(rms_norm(x, w.ffn_norm()), w.w_up().cast<double>());
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < w.ff_dim(); ++j) up(i, j) = silu(up(i, j) + w.b_up()(0, j));
  const MatrixD down = matmul(up, w.w_down().cast<double>());
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < d; ++j) x(i, j) += down(i, j) + w.b_down()(0, j);

  InteractionOutput out{TokenMatrix(lv, d), TokenMatrix(text.rows(), d)};
  for (std::size_t i = 0; i < lv; ++i)
    for (std::size_t j = 0; j < d; ++j) out.visual(i, j) = static_cast<float>(x(i, j));
  for (std::size_t i = 0; i < text.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) out.text(i, j) = static_cast<float>(x(lv + i, j));
  return out;
}

std::string_view text_aggregation_name(TextAggregation a) {
  switch (a) {
    case TextAggregation::mean: return "mean";
    case TextAggregation::product: return "product";
    case TextAggregation::per_candidate: return "per_candidate";
  }
  return "mean";
}

TextAggregation parse_text_aggregation(std::string_view name) {
  if (name == "mean") return TextAggregation::mean;
  if (name == "product") return TextAggregation::product;
  if (name == "per_candidate") return TextAggregation::per_candidate;
  throw ParseError("unknown text aggregation '" + std::string(name) + "' (expected mean, product or per_candidate)");
}

TokenMatrix aggregate_text(std::span<const TokenMatrix> slices, TextAggregation mode) {
  if (slices.empty()) throw EmptyGroupError("aggregate_text needs at least one text slice");
  if (mode == TextAggregation::per_candidate) throw StateError("per_candidate text has no single aggregate");
  const std::size_t rows = slices[0].rows(), cols = slices[0].cols();
  for (const auto& s : slices) {
    if (s.rows() != rows || s.cols() != cols) {
      throw ShapeError("text slices differ in shape: " + slices[0].shape_string() + " and " + s.shape_string());
    }
  }
  std::vector<double> acc(rows * cols, mode == TextAggregation::product ? 1.0 : 0.0);
  for (const auto& s : slices) {
    const auto data = s.data();
    for (std::size_t i = 0; i < acc.size(); ++i) {
      if (mode == TextAggregation::product) acc[i] *= data[i];
      else acc[i] += data[i];
    }
  }
  std::vector<float> out(acc.size());
  const double n = static_cast<double>(slices.size());
  for (std::size_t i = 0; i < acc.size(); ++i)
    out[i] = static_cast<float>(mode == TextAggregation::product ? acc[i] : acc[i] / n);
  return TokenMatrix(rows, cols, std::move(out));
}

std::vector<TokenMatrix> text_for_candidates(std::span<const TokenMatrix> slices, TextAggregation mode) {
  if (mode == TextAggregation::per_candidate) return {slices.begin(), slices.end()};
  const TokenMatrix agg = aggregate_text(slices, mode);
  return std::vector<TokenMatrix>(slices.size(), agg);
}

EncodedGroup encode_group(const InteractionWeights& w, const TokenMatrix& query, std::span<const TokenMatrix> visuals,
                          TextAggregation mode) {
  if (visuals.empty()) throw EmptyGroupError("encode_group needs at least one candidate");
  EncodedGroup out;
  std::vector<TokenMatrix> slices;
  out.visual.reserve(visuals.size());
  slices.reserve(visuals.size());
  for (const auto& v : visuals) {
    InteractionOutput o = interact(w, v, query);
    out.visual.push_back(std::move(o.visual));
    slices.push_back(std::move(o.text));
  }
  out.text = text_for_candidates(slices, mode);
  return out;
}

}  // namespace autov
