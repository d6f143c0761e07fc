#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autov/interaction.hpp"
#include "autov/pipeline.hpp"
#include "autov/ranker.hpp"

namespace autov {

enum class PrefilterSpace { raw, interacted };

std::string_view prefilter_space_name(PrefilterSpace s);
PrefilterSpace parse_prefilter_space(std::string_view name);

struct RetrievalConfig {
  bool prefilter_enabled = true;
  std::size_t prefilter_min_pool = 3;
  bool report_scores = true;
  PrefilterSpace prefilter_space = PrefilterSpace::raw;
  TextAggregation aggregation = TextAggregation::mean;

  void validate() const;
};

struct PrefilterResult {
  std::vector<std::size_t> survivors;  // ascending candidate indices
  std::optional<std::size_t> removed;
  std::vector<double> mean_distance;  // per candidate; empty when the pool is too small
};

// Removes the candidate with the largest mean cosine distance to the others,
// lowest index among tied maxima, when the pool has at least min_pool members.
PrefilterResult prefilter_pooled(std::span<const std::vector<float>> pooled, std::size_t min_pool);

// Pools raw visual tokens (or interacted ones when configured, which needs w).
PrefilterResult prefilter(const CandidateGroup& group, const RetrievalConfig& cfg = {},
                          const InteractionWeights* w = nullptr);

struct RetrievalResult {
  std::size_t selected = 0;
  std::string selected_id;
  std::vector<std::size_t> survivors;
  std::vector<double> scores;  // aligned with survivors
  std::optional<std::size_t> removed;
  std::optional<std::string> removed_id;
};

// First index of the maximum.
std::size_t argmax_lowest_index(std::span<const double> values);

RetrievalResult retrieve(const CandidateGroup& group, const RankerParams& params, const InteractionWeights& w,
                         const RetrievalConfig& cfg = {});

struct BatchSummary {
  std::size_t groups = 0;  // successfully retrieved
  std::size_t errors = 0;
  std::vector<std::size_t> slot_histogram;
};

// Writes one line per dataset record in file order followed by a summary
// block. Records that fail to load or score become error lines; the run
// continues.
BatchSummary batch_retrieve(const std::filesystem::path& dataset, const std::filesystem::path& ranker_checkpoint,
                            const std::filesystem::path& interaction_weights, const RetrievalConfig& cfg,
                            const std::filesystem::path& results, std::size_t threads = 0);

}  // namespace autov
