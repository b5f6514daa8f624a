#include "vigor/validation/correlation.hpp"

#include "vigor/error.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace vigor::validation {

double correlation_p_value(double r, std::size_t n) {
  if (n < 3) throw DegenerateInputError("correlation p-value needs n >= 3");
  const double r2 = std::min(r * r, 1.0);
  if (r2 >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double p = boost::math::ibeta(0.5 * df, 0.5, 1.0 - r2);
  return std::clamp(p, 0.0, 1.0);
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ShapeError("pearson: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()) + " differ");
  const std::size_t n = x.size();
  if (n < 3) throw DegenerateInputError("pearson: need at least 3 observations, got " + std::to_string(n));
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw DegenerateInputError("pearson: constant input vector");
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  return {r, correlation_p_value(r, n), n};
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && values[order[j]] == values[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = rank;
    i = j;
  }
  return ranks;
}

CorrelationResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw ShapeError("spearman: lengths " + std::to_string(x.size()) + " and " + std::to_string(y.size()) + " differ");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

} // namespace vigor::validation
