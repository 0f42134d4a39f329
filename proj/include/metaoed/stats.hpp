#pragma once

#include <vector>

namespace metaoed {

// Average ranks (1-based), ties share their mean rank.
std::vector<double> average_ranks(const std::vector<double>& values);

struct Correlation {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, Student-t approximation with n - 2 degrees of freedom
  int n = 0;
};

Correlation spearman(const std::vector<double>& a, const std::vector<double>& b);

// Percentile with linear interpolation between order statistics (q in [0, 1]).
double percentile(std::vector<double> values, double q);

}  // namespace metaoed
