#include "autov/retrieval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "autov/dataset.hpp"
#include "autov/error.hpp"
#include "autov/parallel.hpp"

namespace autov {

std::string_view prefilter_space_name(PrefilterSpace s) { return s == PrefilterSpace::raw ? "raw" : "interacted"; }

PrefilterSpace parse_prefilter_space(std::string_view name) {
  if (name == "raw") return PrefilterSpace::raw;
  if (name == "interacted") return PrefilterSpace::interacted;
  throw ParseError("unknown prefilter space '" + std::string(name) + "' (expected raw or interacted)");
}

void RetrievalConfig::validate() const {
  if (prefilter_min_pool < 3) throw ValidationError("prefilter_min_pool must be >= 3");
}

PrefilterResult prefilter_pooled(std::span<const std::vector<float>> pooled, std::size_t min_pool) {
  PrefilterResult out;
  const std::size_t n = pooled.size();
  for (std::size_t i = 0; i < n; ++i) {
    bool nonzero = std::any_of(pooled[i].begin(), pooled[i].end(), [](float v) { return v != 0.0f; });
    if (!nonzero) throw DegenerateInputError("candidate " + std::to_string(i) + " has a zero-norm pooled feature");
  }
  if (n < min_pool) {
    for (std::size_t i = 0; i < n; ++i) out.survivors.push_back(i);
    return out;
  }
  out.mean_distance.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = cosine_distance<float>(pooled[i], pooled[j]);
      out.mean_distance[i] += d;
      out.mean_distance[j] += d;
    }
  }
  for (double& d : out.mean_distance) d /= static_cast<double>(n - 1);
  const std::size_t removed = argmax_lowest_index(out.mean_distance);
  out.removed = removed;
  for (std::size_t i = 0; i < n; ++i)
    if (i != removed) out.survivors.push_back(i);
  return out;
}

PrefilterResult prefilter(const CandidateGroup& group, const RetrievalConfig& cfg, const InteractionWeights* w) {
  cfg.validate();
  std::vector<std::vector<float>> pooled;
  pooled.reserve(group.size());
  for (const auto& c : group.candidates) {
    if (cfg.prefilter_space == PrefilterSpace::raw) {
      pooled.push_back(mean_pool(c.visual));
    } else {
      if (w == nullptr) throw StateError("interacted-space prefiltering needs interaction weights");
      pooled.push_back(mean_pool(interact(*w, c.visual, group.query).visual));
    }
  }
  try {
    return prefilter_pooled(pooled, cfg.prefilter_min_pool);
  } catch (const DegenerateInputError&) {
    for (std::size_t i = 0; i < pooled.size(); ++i) {
      if (std::all_of(pooled[i].begin(), pooled[i].end(), [](float v) { return v == 0.0f; })) {
        throw DegenerateInputError("group '" + group.group_id + "' candidate '" + group.candidates[i].id +
                                   "' has a zero-norm pooled feature");
      }
    }
    throw;
  }
}

std::size_t argmax_lowest_index(std::span<const double> values) {
  if (values.empty()) throw EmptyGroupError("argmax of an empty score list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

RetrievalResult retrieve(const CandidateGroup& group, const RankerParams& params, const InteractionWeights& w,
                         const RetrievalConfig& cfg) {
  cfg.validate();
  if (group.size() < 2) throw DegenerateGroupError("group '" + group.group_id + "' needs at least two candidates");
  if (w.model_dim() != params.model_dim) {
    throw ShapeError("interaction dimension " + std::to_string(w.model_dim()) + " differs from ranker dimension " +
                     std::to_string(params.model_dim));
  }
  RetrievalResult out;
  if (cfg.prefilter_enabled) {
    const PrefilterResult pf = prefilter(group, cfg, &w);
    out.survivors = pf.survivors;
    out.removed = pf.removed;
  } else {
    for (std::size_t i = 0; i < group.size(); ++i) out.survivors.push_back(i);
  }
  if (out.removed) out.removed_id = group.candidates[*out.removed].id;

  std::vector<TokenMatrix> visuals;
  for (std::size_t i : out.survivors) visuals.push_back(group.candidates[i].visual);
  const EncodedGroup enc = encode_group(w, group.query, visuals, cfg.aggregation);
  for (std::size_t k = 0; k < enc.size(); ++k) out.scores.push_back(score_features(params, enc.visual[k], enc.text[k]).score);

  out.selected = out.survivors[argmax_lowest_index(out.scores)];
  out.selected_id = group.candidates[out.selected].id;
  return out;
}

BatchSummary batch_retrieve(const std::filesystem::path& dataset, const std::filesystem::path& ranker_checkpoint,
                            const std::filesystem::path& interaction_weights, const RetrievalConfig& cfg,
                            const std::filesystem::path& results, std::size_t threads) {
  cfg.validate();
  const RankerParams params = load_ranker(ranker_checkpoint);
  const InteractionWeights w = load_interaction_weights(interaction_weights);
  const LenientDataset ds = load_dataset_lenient(dataset);

  struct Line {
    std::optional<RetrievalResult> result;
    std::string error_kind;
    std::string error_message;
  };
  std::vector<Line> lines(ds.entries.size());
  parallel_for(ds.entries.size(), threads, [&](std::size_t i) {
    const DatasetEntry& e = ds.entries[i];
    if (e.error) {
      lines[i].error_kind = e.error->kind;
      lines[i].error_message = e.error->message;
      return;
    }
    try {
      lines[i].result = retrieve(*e.group, params, w, cfg);
    } catch (const Error& err) {
      lines[i].error_kind = err.kind();
      lines[i].error_message = err.what();
    }
  });

  std::ofstream out(results, std::ios::trunc);
  if (!out) throw PathError("cannot open '" + results.string() + "' for writing");
  out << "group_id\tselected\tremoved\tscores\n";
  BatchSummary summary;
  char buf[64];
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const DatasetEntry& e = ds.entries[i];
    if (!lines[i].result) {
      ++summary.errors;
      const std::string gid = e.group ? e.group->group_id : (e.error && !e.error->group_id.empty() ? e.error->group_id : "-");
      std::string msg = lines[i].error_message;
      std::replace(msg.begin(), msg.end(), '\t', ' ');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << gid << "\t!error\t" << lines[i].error_kind << '\t' << msg << '\n';
      continue;
    }
    const RetrievalResult& r = *lines[i].result;
    ++summary.groups;
    const std::size_t slots = std::max(e.group->size(), r.selected + 1);
    if (summary.slot_histogram.size() < slots) summary.slot_histogram.resize(slots, 0);
    ++summary.slot_histogram[r.selected];
    out << e.group->group_id << '\t' << r.selected_id << '\t' << (r.removed_id ? *r.removed_id : "-") << '\t';
    if (cfg.report_scores) {
      for (std::size_t k = 0; k < r.survivors.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.6f", r.scores[k]);
        out << (k ? "," : "") << e.group->candidates[r.survivors[k]].id << ':' << buf;
      }
    } else {
      out << '-';
    }
    out << '\n';
  }
  out << "## summary\n";
  out << "groups\t" << summary.groups << '\n';
  out << "errors\t" << summary.errors << '\n';
  out << "slot\tselected\n";
  for (std::size_t s = 0; s < summary.slot_histogram.size(); ++s) out << s << '\t' << summary.slot_histogram[s] << '\n';
  if (!out) throw PathError("failed writing '" + results.string() + "'");
  return summary;
}

}  // namespace autov
