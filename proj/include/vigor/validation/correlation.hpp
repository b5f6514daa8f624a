#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vigor::validation {

struct CorrelationResult {
  double r = 0.0;
  double p_value = 1.0; ///< two-sided, Student t with n - 2 degrees of freedom
  std::size_t n = 0;
};

/// Sample correlation coefficient. Requires n >= 3 and non-constant inputs
/// (DegenerateInputError otherwise).
CorrelationResult pearson(std::span<const double> x, std::span<const double> y);

/// Pearson correlation of average ranks.
CorrelationResult spearman(std::span<const double> x, std::span<const double> y);

/// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

/// Two-sided p-value of the t statistic r sqrt((n-2)/(1-r^2)), evaluated as
/// the regularised incomplete beta I_{1-r^2}((n-2)/2, 1/2).
double correlation_p_value(double r, std::size_t n);

} // namespace vigor::validation
