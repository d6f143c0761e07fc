#include "autov/stats.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "autov/error.hpp"

namespace autov {

double student_t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw DegenerateStatisticsError("t distribution needs positive degrees of freedom");
  const boost::math::students_t dist(dof);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
}

TTestReport paired_ttest(std::span<const double> runs_a, std::span<const double> runs_b) {
  if (runs_a.size() != runs_b.size()) {
    throw ValidationError("paired t-test needs equal-length run lists, got " + std::to_string(runs_a.size()) +
                          " and " + std::to_string(runs_b.size()));
  }
  const std::size_t k = runs_a.size();
  if (k < 2) throw DegenerateStatisticsError("paired t-test needs at least two runs");

  TTestReport r;
  r.differences.resize(k);
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    r.differences[i] = runs_a[i] - runs_b[i];
    sum += r.differences[i];
  }
  r.mean_difference = sum / static_cast<double>(k);
  double ss = 0.0;
  for (double d : r.differences) ss += (d - r.mean_difference) * (d - r.mean_difference);
  r.std_difference = std::sqrt(ss / static_cast<double>(k - 1));
  r.degrees_of_freedom = k - 1;
  // Relative threshold so that float noise around identical runs still counts as zero variance.
  double scale = 0.0;
  for (std::size_t i = 0; i < k; ++i) scale = std::max({scale, std::fabs(runs_a[i]), std::fabs(runs_b[i])});
  if (!(r.std_difference > 1e-14 * std::max(1.0, scale))) {
    throw DegenerateStatisticsError("paired differences have zero variance; t is undefined");
  }
  r.t_statistic = r.mean_difference / (r.std_difference / std::sqrt(static_cast<double>(k)));
  r.p_value = student_t_two_sided_p(r.t_statistic, static_cast<double>(r.degrees_of_freedom));
  return r;
}

}  // namespace autov
