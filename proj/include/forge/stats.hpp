#pragma once

#include <utility>
#include <vector>

namespace forge {

struct PearsonResult {
  double r = 0;
  double p = 1;  // two-sided, t-distribution with n-2 degrees of freedom
};

/// Throws DegenerateInput for n < 3, mismatched sizes or zero variance.
PearsonResult pearson(const std::vector<double>& xs, const std::vector<double>& ys);

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided(double t, double df);

struct ImprovementStats {
  int n = 0;
  int n_improved = 0;
  double improvement_rate = 0;  // percent
  int median_gain = 0;          // lower median
  int max_gain = 0;
};

/// Gains are final - initial for each (initial, final) pair. Throws EmptyInput.
ImprovementStats improvement_stats(const std::vector<std::pair<int, int>>& rating_pairs);

}  // namespace forge
