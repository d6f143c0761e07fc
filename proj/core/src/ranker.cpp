#include "autov/ranker.hpp"

#include <bit>
#include <cmath>
#include <utility>

#include "autov/error.hpp"
#include "bundle.hpp"

namespace autov {

namespace {

constexpr std::string_view kKind = "ranker";
constexpr int kVersion = 1;

void require(const TokenMatrix& m, std::size_t rows, std::size_t cols, std::string_view name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError("ranker tensor '" + std::string(name) + "' is " + m.shape_string() + ", expected " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

MatrixD to_double(const TokenMatrix& m) { return m.cast<double>(); }

FfnTape ffn_forward(const MatrixD& x, const TokenMatrix& w1, const TokenMatrix& b1, const TokenMatrix& w2,
                    const TokenMatrix& b2, Activation act) {
  FfnTape t;
  t.input = x;
  t.pre = matmul(x, to_double(w1));
  add_row_broadcast(t.pre, to_double(b1));
  t.hidden = apply_activation(t.pre, act);
  t.output = matmul(t.hidden, to_double(w2));
  add_row_broadcast(t.output, to_double(b2));
  return t;
}

// Accumulates parameter gradients of one FFN given dY.
void ffn_backward(const FfnTape& t, const MatrixD& dy, const TokenMatrix& w2, Activation act, MatrixD& dw1,
                  MatrixD& db1, MatrixD& dw2, MatrixD& db2) {
  const MatrixD gw2 = matmul_tn(t.hidden, dy);
  for (std::size_t i = 0; i < gw2.size(); ++i) dw2.data()[i] += gw2.data()[i];
  for (std::size_t r = 0; r < dy.rows(); ++r)
    for (std::size_t c = 0; c < dy.cols(); ++c) db2(0, c) += dy(r, c);

  MatrixD dpre = matmul_nt(dy, to_double(w2));
  const MatrixD deriv = activation_derivative(t.pre, act);
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre.data()[i] *= deriv.data()[i];

  const MatrixD gw1 = matmul_tn(t.input, dpre);
  for (std::size_t i = 0; i < gw1.size(); ++i) dw1.data()[i] += gw1.data()[i];
  for (std::size_t r = 0; r < dpre.rows(); ++r)
    for (std::size_t c = 0; c < dpre.cols(); ++c) db1(0, c) += dpre(r, c);
}

void fill_attention(ScoreTape& tape) {
  const std::size_t h = tape.v_prime.cols();
  if (h == 0) throw ShapeError("score needs a positive hidden dimension");
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  MatrixD logits = matmul_nt(tape.v_prime, tape.t_prime);
  for (double& v : logits.data()) v *= scale;
  tape.attention = row_softmax(logits);
  tape.attended = matmul(tape.attention, tape.t_prime);

  double sum = 0.0;
  if (tape.config.reduction == ScoreReduction::attended_mean) {
    for (double v : tape.attended.data()) sum += v;
    tape.score = sum / static_cast<double>(tape.attended.size());
  } else {
    for (double v : logits.data()) sum += v;
    tape.score = sum / static_cast<double>(logits.size());
  }
}

ScoreTape make_tape(const RankerParams& p) {
  ScoreTape tape;
  tape.model_dim = p.model_dim;
  tape.hidden_dim = p.hidden_dim;
  tape.config = p.config;
  tape.params_checksum = p.checksum();
  return tape;
}

}  // namespace

std::string_view score_reduction_name(ScoreReduction r) {
  return r == ScoreReduction::attended_mean ? "attended_mean" : "logit_mean";
}

ScoreReduction parse_score_reduction(std::string_view name) {
  if (name == "attended_mean") return ScoreReduction::attended_mean;
  if (name == "logit_mean") return ScoreReduction::logit_mean;
  throw ParseError("unknown score reduction '" + std::string(name) + "' (expected attended_mean or logit_mean)");
}

RankerParams RankerParams::zeros(std::size_t model_dim, std::size_t hidden_dim, RankerConfig config) {
  if (model_dim == 0 || hidden_dim == 0) throw ShapeError("ranker dimensions must be positive");
  if (hidden_dim > model_dim) {
    throw ShapeError("hidden dimension " + std::to_string(hidden_dim) + " exceeds model dimension " +
                     std::to_string(model_dim));
  }
  RankerParams p;
  p.model_dim = model_dim;
  p.hidden_dim = hidden_dim;
  p.config = config;
  p.w1_v = p.w1_t = TokenMatrix(model_dim, hidden_dim);
  p.w2_v = p.w2_t = TokenMatrix(hidden_dim, hidden_dim);
  p.b1_v = p.b2_v = p.b1_t = p.b2_t = TokenMatrix(1, hidden_dim);
  return p;
}

RankerParams RankerParams::initialize(Rng& rng, std::size_t model_dim, std::size_t hidden_dim, RankerConfig config) {
  RankerParams p = zeros(model_dim, hidden_dim, config);
  const std::pair<TokenMatrix*, std::size_t> weights[] = {
      {&p.w1_v, model_dim}, {&p.w2_v, hidden_dim}, {&p.w1_t, model_dim}, {&p.w2_t, hidden_dim}};
  for (const auto& [m, fan_in] : weights) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (float& v : m->data()) v = static_cast<float>(rng.uniform(-bound, bound));
  }
  return p;
}

std::size_t RankerParams::parameter_count() const {
  std::size_t n = 0;
  for (const TokenMatrix* t : tensors()) n += t->size();
  return n;
}

std::array<TokenMatrix*, RankerParams::kTensorCount> RankerParams::tensors() {
  return {&w1_v, &b1_v, &w2_v, &b2_v, &w1_t, &b1_t, &w2_t, &b2_t};
}

std::array<const TokenMatrix*, RankerParams::kTensorCount> RankerParams::tensors() const {
  return {&w1_v, &b1_v, &w2_v, &b2_v, &w1_t, &b1_t, &w2_t, &b2_t};
}

void RankerParams::validate() const {
  if (model_dim == 0 || hidden_dim == 0) throw ShapeError("ranker dimensions must be positive");
  if (hidden_dim > model_dim) throw ShapeError("ranker hidden dimension exceeds model dimension");
  require(w1_v, model_dim, hidden_dim, "w1_v");
  require(b1_v, 1, hidden_dim, "b1_v");
  require(w2_v, hidden_dim, hidden_dim, "w2_v");
  require(b2_v, 1, hidden_dim, "b2_v");
  require(w1_t, model_dim, hidden_dim, "w1_t");
  require(b1_t, 1, hidden_dim, "b1_t");
  require(w2_t, hidden_dim, hidden_dim, "w2_t");
  require(b2_t, 1, hidden_dim, "b2_t");
  for (std::size_t i = 0; i < kTensorCount; ++i) {
    if (!tensors()[i]->all_finite()) {
      throw ShapeError("ranker tensor '" + std::string(kTensorNames[i]) + "' has non-finite entries");
    }
  }
}

std::uint64_t RankerParams::checksum() const {
  std::uint64_t h = 0x9E3779B97F4A7C15ULL ^ (model_dim << 32) ^ hidden_dim;
  for (const TokenMatrix* t : tensors())
    for (float v : t->data()) h = (h ^ std::bit_cast<std::uint32_t>(v)) * 0x100000001B3ULL;
  return h;
}

RankerGrads RankerGrads::zeros_like(const RankerParams& p) {
  RankerGrads g;
  const auto ts = p.tensors();
  for (std::size_t i = 0; i < RankerParams::kTensorCount; ++i) g.tensors[i] = MatrixD(ts[i]->rows(), ts[i]->cols());
  return g;
}

void RankerGrads::add(const RankerGrads& other) {
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto dst = tensors[i].data();
    const auto src = other.tensors[i].data();
    if (dst.size() != src.size()) throw ShapeError("gradient shapes differ");
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
  }
}

void RankerGrads::scale(double factor) {
  for (auto& t : tensors)
    for (double& v : t.data()) v *= factor;
}

bool RankerGrads::all_finite() const {
  for (const auto& t : tensors)
    if (!t.all_finite()) return false;
  return true;
}

TokenMatrix map_vision(const RankerParams& p, const TokenMatrix& v_tilde) {
  if (v_tilde.cols() != p.model_dim) {
    throw ShapeError("map_vision expects " + std::to_string(p.model_dim) + " columns, got " + v_tilde.shape_string());
  }
  return ffn_forward(to_double(v_tilde), p.w1_v, p.b1_v, p.w2_v, p.b2_v, p.config.activation).output.cast<float>();
}

TokenMatrix map_text(const RankerParams& p, const TokenMatrix& t_tilde) {
  if (t_tilde.cols() != p.model_dim) {
    throw ShapeError("map_text expects " + std::to_string(p.model_dim) + " columns, got " + t_tilde.shape_string());
  }
  return ffn_forward(to_double(t_tilde), p.w1_t, p.b1_t, p.w2_t, p.b2_t, p.config.activation).output.cast<float>();
}

ScoreResult score(const RankerParams& p, const TokenMatrix& v_prime, const TokenMatrix& t_prime) {
  if (p.hidden_dim == 0) throw ShapeError("score needs a positive hidden dimension");
  if (v_prime.cols() != p.hidden_dim || t_prime.cols() != p.hidden_dim) {
    throw ShapeError("score expects " + std::to_string(p.hidden_dim) + " columns, got " + v_prime.shape_string() +
                     " and " + t_prime.shape_string());
  }
  ScoreTape tape = make_tape(p);
  tape.v_prime = to_double(v_prime);
  tape.t_prime = to_double(t_prime);
  fill_attention(tape);
  const double s = tape.score;
  return {s, std::move(tape)};
}

ScoreResult score_features(const RankerParams& p, const TokenMatrix& v_tilde, const TokenMatrix& t_tilde) {
  if (v_tilde.cols() != p.model_dim || t_tilde.cols() != p.model_dim) {
    throw ShapeError("score_features expects " + std::to_string(p.model_dim) + " columns, got " +
                     v_tilde.shape_string() + " and " + t_tilde.shape_string());
  }
  ScoreTape tape = make_tape(p);
  tape.has_mapping = true;
  tape.vision = ffn_forward(to_double(v_tilde), p.w1_v, p.b1_v, p.w2_v, p.b2_v, p.config.activation);
  tape.text = ffn_forward(to_double(t_tilde), p.w1_t, p.b1_t, p.w2_t, p.b2_t, p.config.activation);
  tape.v_prime = tape.vision.output;
  tape.t_prime = tape.text.output;
  fill_attention(tape);
  const double s = tape.score;
  return {s, std::move(tape)};
}

ScoreResult score_candidate(const RankerParams& p, const InteractionWeights& w, const TokenMatrix& visual,
                            const TokenMatrix& query, const TokenMatrix& text_agg) {
  if (w.model_dim() != p.model_dim) {
    throw ShapeError("interaction dimension " + std::to_string(w.model_dim()) + " differs from ranker dimension " +
                     std::to_string(p.model_dim));
  }
  const InteractionOutput out = interact(w, visual, query);
  return score_features(p, out.visual, text_agg);
}

void accumulate_score_gradient(const RankerParams& p, const ScoreTape& tape, double dscore, RankerGrads& grads) {
  if (!tape.has_mapping) throw StateError("tape lacks mapping intermediates; score with score_features");
  if (tape.model_dim != p.model_dim || tape.hidden_dim != p.hidden_dim || !(tape.config == p.config) ||
      tape.params_checksum != p.checksum()) {
    throw StateError("tape was produced under different ranker parameters");
  }
  const std::size_t lv = tape.v_prime.rows();
  const std::size_t lt = tape.t_prime.rows();
  const std::size_t h = p.hidden_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));

  MatrixD dv(lv, h);
  MatrixD dt(lt, h);
  MatrixD dlogits(lv, lt);
  if (p.config.reduction == ScoreReduction::attended_mean) {
    const double d_o = dscore / static_cast<double>(lv * h);
    // dA = dO T'^T with dO constant; dT' = A^T dO.
    std::vector<double> t_rowsum(lt, 0.0);
    for (std::size_t k = 0; k < lt; ++k)
      for (std::size_t c = 0; c < h; ++c) t_rowsum[k] += tape.t_prime(k, c);
    for (std::size_t r = 0; r < lv; ++r) {
      double inner = 0.0;
      for (std::size_t k = 0; k < lt; ++k) inner += tape.attention(r, k) * d_o * t_rowsum[k];
      for (std::size_t k = 0; k < lt; ++k) {
        const double a = tape.attention(r, k);
        dlogits(r, k) = a * (d_o * t_rowsum[k] - inner);
        for (std::size_t c = 0; c < h; ++c) dt(k, c) += a * d_o;
      }
    }
  } else {
    dlogits.fill(dscore / static_cast<double>(lv * lt));
  }
  for (double& v : dlogits.data()) v *= scale;
  const MatrixD dv_part = matmul(dlogits, tape.t_prime);
  const MatrixD dt_part = matmul_tn(dlogits, tape.v_prime);
  for (std::size_t i = 0; i < dv.size(); ++i) dv.data()[i] += dv_part.data()[i];
  for (std::size_t i = 0; i < dt.size(); ++i) dt.data()[i] += dt_part.data()[i];

  auto& g = grads.tensors;
  ffn_backward(tape.vision, dv, p.w2_v, p.config.activation, g[0], g[1], g[2], g[3]);
  ffn_backward(tape.text, dt, p.w2_t, p.config.activation, g[4], g[5], g[6], g[7]);
}

RankerGrads backward(const RankerParams& p, const ScoreTape& tape_chosen, const ScoreTape& tape_rejected,
                     double upstream) {
  const double delta = tape_chosen.score - tape_rejected.score;
  // d softplus(-delta) / d delta = -sigmoid(-delta)
  const double sig = 1.0 / (1.0 + std::exp(delta));
  RankerGrads g = RankerGrads::zeros_like(p);
  accumulate_score_gradient(p, tape_chosen, -sig * upstream, g);
  accumulate_score_gradient(p, tape_rejected, sig * upstream, g);
  return g;
}

void save_ranker(const RankerParams& p, const std::filesystem::path& path) {
  p.validate();
  const nlohmann::json meta = {{"D", p.model_dim},
                               {"h", p.hidden_dim},
                               {"activation", activation_name(p.config.activation)},
                               {"reduction", score_reduction_name(p.config.reduction)}};
  std::vector<detail::NamedTensor> tensors;
  const auto ts = p.tensors();
  for (std::size_t i = 0; i < RankerParams::kTensorCount; ++i)
    tensors.push_back({std::string(RankerParams::kTensorNames[i]), *ts[i]});
  detail::write_bundle(path, kKind, kVersion, meta, tensors);
}

RankerParams load_ranker(const std::filesystem::path& path) {
  const detail::Bundle b = detail::read_bundle(path, kKind, kVersion);
  RankerParams p;
  p.model_dim = detail::meta_field<std::size_t>(b.meta, "D");
  p.hidden_dim = detail::meta_field<std::size_t>(b.meta, "h");
  try {
    p.config.activation = parse_activation(detail::meta_field<std::string>(b.meta, "activation"));
    p.config.reduction = parse_score_reduction(detail::meta_field<std::string>(b.meta, "reduction"));
  } catch (const ParseError& e) {
    throw FormatError(std::string("invalid ranker header: ") + e.what());
  }
  const auto ts = p.tensors();
  for (std::size_t i = 0; i < RankerParams::kTensorCount; ++i) *ts[i] = b.get(RankerParams::kTensorNames[i]);
  try {
    p.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("invalid ranker checkpoint: ") + e.what());
  }
  return p;
}

}  // namespace autov
