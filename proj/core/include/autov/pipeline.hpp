#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "autov/matrix.hpp"

namespace autov {

struct Candidate {
  std::string id;
  TokenMatrix visual;               // l_v x D
  std::optional<double> loss;       // observed combination loss
  std::optional<double> true_loss;  // noiseless loss, known only for synthetic data
};

struct CandidateGroup {
  std::string group_id;
  TokenMatrix query;  // l_t x D
  std::vector<Candidate> candidates;
  std::optional<std::vector<std::size_t>> rank;

  std::size_t size() const noexcept { return candidates.size(); }
};

// rank[i] is candidate i's position in ascending-loss order (0 = best).
struct Quadruple {
  std::size_t group = 0;  // index into the group list it was built from
  std::string group_id;
  std::vector<std::size_t> rank;
  std::vector<double> losses;

  // Candidate indices from best to worst.
  std::vector<std::size_t> order() const;
};

struct PreferencePair {
  std::size_t group = 0;
  std::size_t chosen = 0;
  std::size_t rejected = 0;

  bool operator==(const PreferencePair&) const = default;
  auto operator<=>(const PreferencePair&) const = default;
};

struct FilterConfig {
  double min_loss_std = 0.05;
  double max_mean_loss_quantile = 0.95;

  void validate() const;
};

enum class DropReason { low_variance, high_mean_loss };

std::string_view drop_reason_name(DropReason r);

struct DroppedGroup {
  std::size_t index = 0;
  DropReason reason = DropReason::low_variance;
  double loss_std = 0.0;
  double loss_mean = 0.0;
};

struct FilterResult {
  std::vector<std::size_t> kept;      // input indices, input order
  std::vector<DroppedGroup> dropped;  // input order
  double mean_threshold = 0.0;        // group means above this are dropped
};

// Ascending loss, ties broken by candidate index.
Quadruple rank_group(const CandidateGroup& g, std::size_t group_index = 0);

// Population standard deviation and mean of a group's observed losses.
double loss_std(const CandidateGroup& g);
double loss_mean(const CandidateGroup& g);

// Linear-interpolation quantile (numpy's default) of the values.
double quantile(std::vector<double> values, double q);

// Drops groups whose loss std is below min_loss_std (low variance, checked
// first), then groups whose mean exceeds the max_mean_loss_quantile quantile
// of all group means in the batch.
FilterResult filter_groups(std::span<const CandidateGroup> groups, const FilterConfig& cfg);
// Same, with an explicit mean threshold instead of the batch quantile.
FilterResult filter_groups(std::span<const CandidateGroup> groups, const FilterConfig& cfg, double mean_threshold);

// C(n, 2) pairs; the lower-loss member is chosen, ties go to the lower index.
std::vector<PreferencePair> expand_pairs(const Quadruple& q);

// Ranks and expands every group; pair.group indexes into `groups`.
std::vector<PreferencePair> expand_all_pairs(std::span<const CandidateGroup> groups);

void write_pairs(const std::filesystem::path& path, std::span<const PreferencePair> pairs,
                 std::span<const CandidateGroup> groups);
std::vector<PreferencePair> read_pairs(const std::filesystem::path& path, std::span<const CandidateGroup> groups);

void write_quadruples(const std::filesystem::path& path, std::span<const Quadruple> quads);

}  // namespace autov
