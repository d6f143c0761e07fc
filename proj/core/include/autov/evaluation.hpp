#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "autov/interaction.hpp"
#include "autov/pipeline.hpp"
#include "autov/strategies.hpp"

namespace autov {

struct StrategyResult {
  std::string strategy;
  std::size_t groups = 0;
  double agreement = 0.0;  // fraction selecting a true-loss minimizer
  double regret = 0.0;     // mean true-loss gap to the minimizer
  std::vector<std::size_t> histogram;  // selections per candidate slot
  double histogram_entropy = 0.0;      // bits
};

// True losses when known, observed losses otherwise.
std::vector<double> true_losses(const CandidateGroup& g);

double histogram_entropy(std::span<const std::size_t> histogram);

// `encoded` is either empty or aligned with `groups`.
StrategyResult evaluate(const Selector& selector, std::span<const CandidateGroup> groups,
                        std::span<const EncodedGroup> encoded = {}, std::size_t threads = 0);

}  // namespace autov
