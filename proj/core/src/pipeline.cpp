#include "autov/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "autov/error.hpp"

namespace autov {

namespace {

std::vector<double> observed_losses(const CandidateGroup& g) {
  std::vector<double> out;
  out.reserve(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!g.candidates[i].loss) {
      throw IncompleteGroupError("group '" + g.group_id + "' candidate " + std::to_string(i) + " has no loss");
    }
    out.push_back(*g.candidates[i].loss);
  }
  return out;
}

}  // namespace

std::vector<std::size_t> Quadruple::order() const {
  std::vector<std::size_t> out(rank.size());
  for (std::size_t i = 0; i < rank.size(); ++i) out[rank[i]] = i;
  return out;
}

void FilterConfig::validate() const {
  if (!(min_loss_std >= 0.0)) throw ValidationError("min_loss_std must be >= 0");
  if (!(max_mean_loss_quantile > 0.0 && max_mean_loss_quantile <= 1.0)) {
    throw ValidationError("max_mean_loss_quantile must be in (0, 1]");
  }
}

std::string_view drop_reason_name(DropReason r) {
  return r == DropReason::low_variance ? "low_variance" : "high_mean_loss";
}

Quadruple rank_group(const CandidateGroup& g, std::size_t group_index) {
  Quadruple q;
  q.group = group_index;
  q.group_id = g.group_id;
  q.losses = observed_losses(g);
  std::vector<std::size_t> order(q.losses.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return q.losses[a] < q.losses[b]; });
  q.rank.resize(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) q.rank[order[pos]] = pos;
  return q;
}

double loss_mean(const CandidateGroup& g) {
  const auto l = observed_losses(g);
  if (l.empty()) throw EmptyGroupError("group '" + g.group_id + "' has no candidates");
  return std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
}

double loss_std(const CandidateGroup& g) {
  const auto l = observed_losses(g);
  if (l.empty()) throw EmptyGroupError("group '" + g.group_id + "' has no candidates");
  const double mean = std::accumulate(l.begin(), l.end(), 0.0) / static_cast<double>(l.size());
  double ss = 0.0;
  for (double v : l) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(l.size()));
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw EmptyGroupError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

FilterResult filter_groups(std::span<const CandidateGroup> groups, const FilterConfig& cfg) {
  cfg.validate();
  if (groups.empty()) return {};
  std::vector<double> means;
  means.reserve(groups.size());
  for (const auto& g : groups) means.push_back(loss_mean(g));
  return filter_groups(groups, cfg, quantile(std::move(means), cfg.max_mean_loss_quantile));
}

FilterResult filter_groups(std::span<const CandidateGroup> groups, const FilterConfig& cfg, double mean_threshold) {
  cfg.validate();
  FilterResult out;
  out.mean_threshold = mean_threshold;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const double sd = loss_std(groups[i]);
    const double mean = loss_mean(groups[i]);
    if (sd < cfg.min_loss_std) {
      out.dropped.push_back({i, DropReason::low_variance, sd, mean});
    } else if (mean > mean_threshold) {
      out.dropped.push_back({i, DropReason::high_mean_loss, sd, mean});
    } else {
      out.kept.push_back(i);
    }
  }
  return out;
}

std::vector<PreferencePair> expand_pairs(const Quadruple& q) {
  const std::size_t n = q.losses.size();
  if (n < 2) throw DegenerateGroupError("group '" + q.group_id + "' has fewer than two candidates");
  std::vector<PreferencePair> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      // Ranks already encode the loss order with the index tie-break.
      if (q.rank[i] < q.rank[j]) pairs.push_back({q.group, i, j});
      else pairs.push_back({q.group, j, i});
    }
  }
  return pairs;
}

std::vector<PreferencePair> expand_all_pairs(std::span<const CandidateGroup> groups) {
  std::vector<PreferencePair> out;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto pairs = expand_pairs(rank_group(groups[i], i));
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

void write_pairs(const std::filesystem::path& path, std::span<const PreferencePair> pairs,
                 std::span<const CandidateGroup> groups) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PathError("cannot open '" + path.string() + "' for writing");
  out << "group_id\tchosen\trejected\tchosen_id\trejected_id\n";
  for (const auto& p : pairs) {
    if (p.group >= groups.size()) throw StateError("pair refers to missing group " + std::to_string(p.group));
    const auto& g = groups[p.group];
    out << g.group_id << '\t' << p.chosen << '\t' << p.rejected << '\t' << g.candidates.at(p.chosen).id << '\t'
        << g.candidates.at(p.rejected).id << '\n';
  }
}

std::vector<PreferencePair> read_pairs(const std::filesystem::path& path, std::span<const CandidateGroup> groups) {
  std::ifstream in(path);
  if (!in) throw PathError("cannot open '" + path.string() + "'");
  std::unordered_map<std::string, std::size_t> by_id;
  for (std::size_t i = 0; i < groups.size(); ++i) by_id.emplace(groups[i].group_id, i);

  std::vector<PreferencePair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::istringstream fields(line);
    std::string gid;
    long long chosen = -1, rejected = -1;
    if (!std::getline(fields, gid, '\t') || !(fields >> chosen >> rejected)) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed pair line");
    }
    const auto it = by_id.find(gid);
    if (it == by_id.end()) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": unknown group '" + gid + "'");
    }
    const auto n = static_cast<long long>(groups[it->second].size());
    if (chosen < 0 || rejected < 0 || chosen >= n || rejected >= n || chosen == rejected) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": invalid candidate indices");
    }
    pairs.push_back({it->second, static_cast<std::size_t>(chosen), static_cast<std::size_t>(rejected)});
  }
  return pairs;
}

void write_quadruples(const std::filesystem::path& path, std::span<const Quadruple> quads) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PathError("cannot open '" + path.string() + "' for writing");
  for (const auto& q : quads) {
    nlohmann::json rec = {{"group_id", q.group_id}, {"rank", q.rank}, {"losses", q.losses}};
    out << rec.dump() << '\n';
  }
}

}  // namespace autov
