#include "autov/report.hpp"

#include <cmath>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "autov/error.hpp"

namespace autov {

namespace {

constexpr double kDiscrepancyTolerance = 5e-3;

void write_header(std::ostream& out, std::span<const std::string> header) {
  for (const auto& line : header) out << "# " << line << '\n';
}

std::string join_counts(std::span<const std::size_t> h) {
  std::string s;
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(h[i]);
  }
  return s;
}

}  // namespace

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::vector<StrategySummary> summarize_runs(std::span<const BenchRun> runs) {
  std::vector<StrategySummary> out;
  if (runs.empty()) return out;
  for (const auto& first : runs.front().results) {
    StrategySummary s;
    s.strategy = first.strategy;
    s.groups = first.groups;
    std::vector<double> regrets;
    for (const auto& run : runs) {
      const StrategyResult& r = run.result(first.strategy);
      s.agreement += r.agreement;
      regrets.push_back(r.regret);
      if (s.histogram.size() < r.histogram.size()) s.histogram.resize(r.histogram.size(), 0);
      for (std::size_t k = 0; k < r.histogram.size(); ++k) s.histogram[k] += r.histogram[k];
    }
    s.runs = runs.size();
    const double k = static_cast<double>(runs.size());
    s.agreement /= k;
    for (double r : regrets) s.regret += r;
    s.regret /= k;
    if (runs.size() > 1) {
      double ss = 0.0;
      for (double r : regrets) ss += (r - s.regret) * (r - s.regret);
      s.regret_std = std::sqrt(ss / (k - 1.0));
    }
    s.histogram_entropy = histogram_entropy(s.histogram);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<double> regrets_of(std::span<const BenchRun> runs, const std::string& strategy) {
  std::vector<double> out;
  out.reserve(runs.size());
  for (const auto& run : runs) out.push_back(run.result(strategy).regret);
  return out;
}

void write_strategy_table(std::ostream& out, std::span<const StrategySummary> rows,
                          std::span<const std::string> header) {
  write_header(out, header);
  out << "strategy\truns\tgroups\tagreement\tregret\tregret_std\thistogram_entropy\thistogram\n";
  for (const auto& r : rows) {
    out << r.strategy << '\t' << r.runs << '\t' << r.groups << '\t' << fixed6(r.agreement) << '\t'
        << fixed6(r.regret) << '\t' << fixed6(r.regret_std) << '\t' << fixed6(r.histogram_entropy) << '\t'
        << join_counts(r.histogram) << '\n';
  }
}

void write_sweep_table(std::ostream& out, std::span<const SweepRow> rows, std::span<const std::string> header) {
  write_header(out, header);
  out << "pool_size\tgroups\tagreement\tregret\toracle_loss\trandom_agreement\n";
  for (const auto& r : rows) {
    out << r.pool_size << '\t' << r.groups << '\t' << fixed6(r.agreement) << '\t' << fixed6(r.regret) << '\t'
        << fixed6(r.oracle_loss) << '\t' << fixed6(r.random_agreement) << '\n';
  }
}

void write_records(std::ostream& out, std::span<const BenchRun> runs, std::span<const SweepRow> sweep,
                   std::uint64_t sweep_seed) {
  for (const auto& run : runs) {
    for (const auto& r : run.results) {
      nlohmann::ordered_json j;
      j["record"] = "strategy";
      j["seed"] = run.seed;
      j["strategy"] = r.strategy;
      j["groups"] = r.groups;
      j["agreement"] = r.agreement;
      j["regret"] = r.regret;
      j["histogram_entropy"] = r.histogram_entropy;
      j["histogram"] = r.histogram;
      out << j.dump() << '\n';
    }
  }
  for (const auto& r : sweep) {
    nlohmann::ordered_json j;
    j["record"] = "sweep";
    j["seed"] = sweep_seed;
    j["pool_size"] = r.pool_size;
    j["groups"] = r.groups;
    j["agreement"] = r.agreement;
    j["regret"] = r.regret;
    j["oracle_loss"] = r.oracle_loss;
    j["random_agreement"] = r.random_agreement;
    out << j.dump() << '\n';
  }
}

bool mean_discrepancy(const TTestReport& r, double stated_mean) {
  return std::abs(r.mean_difference - stated_mean) > kDiscrepancyTolerance;
}

void write_ttest_report(std::ostream& out, const std::string& title, const TTestReport& r,
                        std::optional<double> stated_mean) {
  out << "[" << title << "]\n";
  out << "differences";
  for (double d : r.differences) out << ' ' << fixed6(d);
  out << '\n';
  out << "mean_difference " << fixed6(r.mean_difference) << '\n';
  out << "std_difference " << fixed6(r.std_difference) << '\n';
  out << "t_statistic " << fixed6(r.t_statistic) << '\n';
  out << "degrees_of_freedom " << r.degrees_of_freedom << '\n';
  char p[64];
  std::snprintf(p, sizeof p, "%.6e", r.p_value);
  out << "p_value " << p << '\n';
  out << "significant_at_0.05 " << (r.p_value < 0.05 ? "yes" : "no") << '\n';
  if (stated_mean) {
    out << "stated_mean " << fixed6(*stated_mean) << '\n';
    if (mean_discrepancy(r, *stated_mean)) {
      out << "discrepancy stated mean " << fixed6(*stated_mean) << " does not match the mean of the listed differences "
          << fixed6(r.mean_difference) << "; statistics above use the listed differences\n";
    }
  }
}

}  // namespace autov
