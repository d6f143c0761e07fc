#include "settings.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "autov/error.hpp"

namespace autov::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw UsageError("invalid value '" + std::string(value) + "' for " + std::string(key) + " (expected " +
                   std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto t = trim(v);
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) bad_value(key, v, "a nonnegative integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  const auto t = trim(v);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  const auto t = trim(v);
  if (t.empty() || t == "none") return out;
  std::size_t start = 0;
  while (start <= t.size()) {
    const auto comma = t.find(',', start);
    const auto end = comma == std::string::npos ? t.size() : comma;
    out.push_back(trim(std::string_view(t).substr(start, end - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

template <class Parse>
auto named(std::string_view key, std::string_view v, Parse parse, std::string_view expected) {
  try {
    return parse(trim(v));
  } catch (const Error&) {
    bad_value(key, v, expected);
  }
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

template <class T>
std::string join(const std::vector<T>& xs, std::string (*fmt)(T)) {
  if (xs.empty()) return "none";
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ',';
    s += fmt(xs[i]);
  }
  return s;
}

std::string size_text(std::size_t v) { return std::to_string(v); }

template <class Member>
Key double_key(std::string name, std::string help, Member member) {
  return Key{name, std::move(help), [member](const Settings& s) { return format_double(member(s)); },
             [member, name](Settings& s, std::string_view v) { member(s) = to_double(name, v); }};
}

template <class Member>
Key size_key(std::string name, std::string help, Member member) {
  return Key{name, std::move(help), [member](const Settings& s) { return std::to_string(member(s)); },
             [member, name](Settings& s, std::string_view v) {
               member(s) = static_cast<std::remove_reference_t<decltype(member(s))>>(to_uint(name, v));
             }};
}

template <class Member>
Key bool_key(std::string name, std::string help, Member member) {
  return Key{name, std::move(help), [member](const Settings& s) { return bool_text(member(s)); },
             [member, name](Settings& s, std::string_view v) { member(s) = to_bool(name, v); }};
}

#define AUTOV_FIELD(expr) [](auto& s) -> auto& { return s.expr; }

std::vector<Key> build_keys() {
  std::vector<Key> k;
  k.push_back(size_key("seed", "global seed for every randomized step", AUTOV_FIELD(seed)));
  k.push_back(size_key("threads", "worker threads, 0 = machine parallelism", AUTOV_FIELD(bench.threads)));

  k.push_back(size_key("synthetic.model_dim", "token dimension D", AUTOV_FIELD(bench.synthetic.model_dim)));
  k.push_back(size_key("synthetic.h_true", "rank of the planted latent map", AUTOV_FIELD(bench.synthetic.h_true)));
  k.push_back(size_key("synthetic.visual_tokens", "visual tokens per candidate", AUTOV_FIELD(bench.synthetic.visual_tokens)));
  k.push_back(size_key("synthetic.text_tokens", "query tokens", AUTOV_FIELD(bench.synthetic.text_tokens)));
  k.push_back(size_key("synthetic.pool_size", "candidates per group", AUTOV_FIELD(bench.synthetic.pool_size)));
  k.push_back(size_key("synthetic.train_groups", "training groups", AUTOV_FIELD(bench.synthetic.train_groups)));
  k.push_back(size_key("synthetic.test_groups", "test groups", AUTOV_FIELD(bench.synthetic.test_groups)));
  k.push_back(double_key("synthetic.noise_std", "observation noise on losses", AUTOV_FIELD(bench.synthetic.noise_std)));
  k.push_back(size_key("synthetic.latent_dim", "latent subspace dimension", AUTOV_FIELD(bench.synthetic.latent_dim)));
  k.push_back(double_key("synthetic.prompt_gain", "prompt weight relative to image base", AUTOV_FIELD(bench.synthetic.prompt_gain)));
  k.push_back(double_key("synthetic.prompt_spread", "isotropic prompt noise", AUTOV_FIELD(bench.synthetic.prompt_spread)));
  k.push_back(double_key("synthetic.topic_noise", "query topic noise", AUTOV_FIELD(bench.synthetic.topic_noise)));
  k.push_back(double_key("synthetic.query_jitter", "per-token query noise", AUTOV_FIELD(bench.synthetic.query_jitter)));
  k.push_back(double_key("synthetic.token_jitter", "per-token visual noise", AUTOV_FIELD(bench.synthetic.token_jitter)));
  k.push_back(double_key("synthetic.alignment_scale", "scale of the planted alignment", AUTOV_FIELD(bench.synthetic.alignment_scale)));
  k.push_back(double_key("synthetic.distortion_power", "exponent shaping distortion draws", AUTOV_FIELD(bench.synthetic.distortion_power)));
  k.push_back(double_key("synthetic.distortion_gain", "magnitude of off-topic distortion", AUTOV_FIELD(bench.synthetic.distortion_gain)));
  k.push_back(double_key("synthetic.strength_min", "lower prompt strength", AUTOV_FIELD(bench.synthetic.strength_min)));
  k.push_back(double_key("synthetic.strength_max", "upper prompt strength", AUTOV_FIELD(bench.synthetic.strength_max)));
  k.push_back(double_key("synthetic.visual_offset", "shared visual token offset", AUTOV_FIELD(bench.synthetic.visual_offset)));
  k.push_back(double_key("synthetic.slot_skew", "extra distortion for later slots", AUTOV_FIELD(bench.synthetic.slot_skew)));
  k.push_back(double_key("synthetic.outlier_fraction", "groups with one orthogonal outlier", AUTOV_FIELD(bench.synthetic.outlier_fraction)));

  k.push_back(size_key("interaction.heads", "attention heads of the frozen layer", AUTOV_FIELD(bench.interaction_heads)));
  k.push_back(size_key("interaction.ff_dim", "feed-forward width of the frozen layer", AUTOV_FIELD(bench.interaction_ff_dim)));
  k.push_back(Key{"interaction.aggregation", "text aggregation: mean, product or per_candidate",
                  [](const Settings& s) { return std::string(text_aggregation_name(s.bench.aggregation)); },
                  [](Settings& s, std::string_view v) {
                    s.bench.aggregation = named("interaction.aggregation", v, [](const std::string& t) { return parse_text_aggregation(t); },
                                                "mean, product or per_candidate");
                    s.bench.retrieval.aggregation = s.bench.aggregation;
                  }});

  k.push_back(double_key("filter.min_loss_std", "drop groups whose loss std is below this", AUTOV_FIELD(bench.filter.min_loss_std)));
  k.push_back(double_key("filter.max_mean_loss_quantile", "drop groups whose mean loss exceeds this quantile",
                         AUTOV_FIELD(bench.filter.max_mean_loss_quantile)));

  k.push_back(double_key("train.learning_rate", "Adam step size", AUTOV_FIELD(bench.train.learning_rate)));
  k.push_back(size_key("train.batch_size", "pairs per optimizer step", AUTOV_FIELD(bench.train.batch_size)));
  k.push_back(size_key("train.epochs", "training epochs", AUTOV_FIELD(bench.train.epochs)));
  k.push_back(double_key("train.beta1", "first moment decay", AUTOV_FIELD(bench.train.beta1)));
  k.push_back(double_key("train.beta2", "second moment decay", AUTOV_FIELD(bench.train.beta2)));
  k.push_back(double_key("train.epsilon", "Adam epsilon", AUTOV_FIELD(bench.train.epsilon)));
  k.push_back(size_key("train.accumulation_steps", "micro-batches per optimizer step", AUTOV_FIELD(bench.train.accumulation_steps)));
  k.push_back(size_key("train.hidden_dim", "mapping width h", AUTOV_FIELD(bench.train.hidden_dim)));
  k.push_back(Key{"train.activation", "mapping nonlinearity: relu, tanh or identity",
                  [](const Settings& s) { return std::string(activation_name(s.bench.train.ranker.activation)); },
                  [](Settings& s, std::string_view v) {
                    s.bench.train.ranker.activation =
                        named("train.activation", v, [](const std::string& t) { return parse_activation(t); }, "relu, tanh or identity");
                  }});
  k.push_back(Key{"train.reduction", "score reduction: attended_mean or logit_mean",
                  [](const Settings& s) { return std::string(score_reduction_name(s.bench.train.ranker.reduction)); },
                  [](Settings& s, std::string_view v) {
                    s.bench.train.ranker.reduction = named(
                        "train.reduction", v, [](const std::string& t) { return parse_score_reduction(t); }, "attended_mean or logit_mean");
                  }});

  k.push_back(bool_key("retrieval.prefilter_enabled", "drop the farthest candidate before scoring",
                       AUTOV_FIELD(bench.retrieval.prefilter_enabled)));
  k.push_back(size_key("retrieval.prefilter_min_pool", "smallest pool that is pre-filtered",
                       AUTOV_FIELD(bench.retrieval.prefilter_min_pool)));
  k.push_back(bool_key("retrieval.report_scores", "write survivor scores to the results file",
                       AUTOV_FIELD(bench.retrieval.report_scores)));
  k.push_back(Key{"retrieval.prefilter_space", "pre-filter feature space: raw or interacted",
                  [](const Settings& s) { return std::string(prefilter_space_name(s.bench.retrieval.prefilter_space)); },
                  [](Settings& s, std::string_view v) {
                    s.bench.retrieval.prefilter_space = named(
                        "retrieval.prefilter_space", v, [](const std::string& t) { return parse_prefilter_space(t); }, "raw or interacted");
                  }});

  k.push_back(size_key("bench.runs", "seeds per strategy comparison (seed, seed + 1, ...)", AUTOV_FIELD(bench.runs)));
  k.push_back(size_key("bench.fixed_slot", "slot picked by the fixed strategy", AUTOV_FIELD(bench.fixed_slot)));
  k.push_back(bool_key("bench.filter_train", "apply the group filter to training data", AUTOV_FIELD(bench.filter_train)));
  k.push_back(bool_key("bench.train_baselines", "train regression, gate and list-wise baselines",
                       AUTOV_FIELD(bench.train_baselines)));
  k.push_back(Key{"bench.sweep_sizes", "pool sizes for the sweep, comma separated or none",
                  [](const Settings& s) { return join(s.bench.sweep_sizes, &size_text); },
                  [](Settings& s, std::string_view v) {
                    std::vector<std::size_t> sizes;
                    for (const auto& item : split_list(v)) sizes.push_back(static_cast<std::size_t>(to_uint("bench.sweep_sizes", item)));
                    s.bench.sweep_sizes = std::move(sizes);
                  }});
  k.push_back(Key{"bench.ttest_reference", "extra paired differences to test, comma separated or none",
                  [](const Settings& s) { return join(s.ttest_reference, &format_double); },
                  [](Settings& s, std::string_view v) {
                    std::vector<double> values;
                    for (const auto& item : split_list(v)) values.push_back(to_double("bench.ttest_reference", item));
                    s.ttest_reference = std::move(values);
                  }});
  k.push_back(Key{"bench.ttest_stated_mean", "mean reported alongside the reference differences, or none",
                  [](const Settings& s) { return s.ttest_stated_mean ? format_double(*s.ttest_stated_mean) : std::string("none"); },
                  [](Settings& s, std::string_view v) {
                    const auto t = trim(v);
                    if (t.empty() || t == "none") {
                      s.ttest_stated_mean.reset();
                    } else {
                      s.ttest_stated_mean = to_double("bench.ttest_stated_mean", t);
                    }
                  }});
  return k;
}

#undef AUTOV_FIELD

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ec == std::errc() ? ptr : buf);
}

void Settings::apply_seed() {
  bench.synthetic.seed = seed;
  bench.train.seed = seed;
}

void Settings::validate() const {
  try {
    bench.synthetic.validate();
    bench.train.validate();
    bench.filter.validate();
    bench.retrieval.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  if (bench.runs == 0) throw UsageError("bench.runs must be >= 1");
}

const std::vector<Key>& keys() {
  static const std::vector<Key> all = build_keys();
  return all;
}

const Key* find_key(std::string_view name) {
  for (const auto& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

void set_key(Settings& s, std::string_view name, std::string_view value) {
  const Key* k = find_key(name);
  if (k == nullptr) {
    std::string valid;
    for (const auto& key : keys()) valid += "\n  " + key.name;
    throw UsageError("unknown config key '" + std::string(name) + "'; valid keys:" + valid);
  }
  k->set(s, value);
}

void apply_config_text(Settings& s, std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const std::string where = origin + ":" + std::to_string(lineno) + ": ";
    if (t.front() == '[') {
      if (t.back() != ']') throw UsageError(where + "malformed section header '" + t + "'");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw UsageError(where + "expected 'key = value', got '" + t + "'");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    try {
      set_key(s, full, value);
    } catch (const UsageError& e) {
      throw UsageError(where + e.what());
    }
  }
}

void apply_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PathError("cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  apply_config_text(s, buf.str(), path);
}

std::string key_listing() {
  const Settings defaults;
  std::size_t width = 0;
  for (const auto& k : keys()) width = std::max(width, k.name.size() + 3 + k.get(defaults).size());
  std::string out;
  for (const auto& k : keys()) {
    std::string line = "  " + k.name + " = " + k.get(defaults);
    line.resize(width + 4, ' ');
    out += line + k.help + "\n";
  }
  return out;
}

}  // namespace autov::cli
