#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace autov {

struct TTestReport {
  std::vector<double> differences;  // a_i - b_i
  double mean_difference = 0.0;
  double std_difference = 0.0;  // sample standard deviation (k - 1)
  double t_statistic = 0.0;
  std::size_t degrees_of_freedom = 0;
  double p_value = 1.0;  // two-sided
};

// Classic paired t-test on d_i = a_i - b_i.
TTestReport paired_ttest(std::span<const double> runs_a, std::span<const double> runs_b);

// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
double student_t_two_sided_p(double t, double dof);

}  // namespace autov
