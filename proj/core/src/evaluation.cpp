#include "autov/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "autov/error.hpp"
#include "autov/parallel.hpp"

namespace autov {

std::vector<double> true_losses(const CandidateGroup& g) {
  std::vector<double> out;
  out.reserve(g.size());
  for (const auto& c : g.candidates) {
    if (c.true_loss) out.push_back(*c.true_loss);
    else if (c.loss) out.push_back(*c.loss);
    else throw IncompleteGroupError("incomplete dataset: group '" + g.group_id + "' candidate '" + c.id + "' has no loss");
  }
  return out;
}

double histogram_entropy(std::span<const std::size_t> histogram) {
  double total = 0.0;
  for (std::size_t c : histogram) total += static_cast<double>(c);
  if (total == 0.0) return 0.0;
  double h = 0.0;
  for (std::size_t c : histogram) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

StrategyResult evaluate(const Selector& selector, std::span<const CandidateGroup> groups,
                        std::span<const EncodedGroup> encoded, std::size_t threads) {
  if (!encoded.empty() && encoded.size() != groups.size()) throw StateError("encoded features do not match the groups");
  std::vector<std::vector<double>> losses(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) losses[i] = true_losses(groups[i]);

  std::vector<std::size_t> selected(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t i) {
    selected[i] = selector.select(groups[i], encoded.empty() ? nullptr : &encoded[i], i);
  });

  StrategyResult r;
  r.strategy = selector.name();
  r.groups = groups.size();
  std::size_t max_n = 0;
  for (const auto& g : groups) max_n = std::max(max_n, g.size());
  r.histogram.assign(max_n, 0);
  std::size_t hits = 0;
  double regret = 0.0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto& l = losses[i];
    if (selected[i] >= l.size()) throw StateError(selector.name() + " selected an out-of-range candidate");
    const double best = *std::min_element(l.begin(), l.end());
    if (l[selected[i]] == best) ++hits;
    regret += l[selected[i]] - best;
    ++r.histogram[selected[i]];
  }
  if (!groups.empty()) {
    r.agreement = static_cast<double>(hits) / static_cast<double>(groups.size());
    r.regret = regret / static_cast<double>(groups.size());
  }
  r.histogram_entropy = histogram_entropy(r.histogram);
  return r;
}

}  // namespace autov
