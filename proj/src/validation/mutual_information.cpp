#include "vigor/validation/mutual_information.hpp"

#include "vigor/error.hpp"
#include "vigor/rng.hpp"

#include <boost/math/special_functions/digamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace vigor::validation {

namespace {

/// Standardises in place; returns false for a constant vector.
bool standardize(std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) return false;
  for (double& x : v) x = (x - mean) / sd;
  return true;
}

/// Number of sorted values strictly inside (center - radius, center + radius).
std::size_t count_within(const std::vector<double>& sorted, double center, double radius) {
  const auto lo = std::upper_bound(sorted.begin(), sorted.end(), center - radius);
  const auto hi = std::lower_bound(sorted.begin(), sorted.end(), center + radius);
  return hi > lo ? static_cast<std::size_t>(hi - lo) : 0;
}

} // namespace

double knn_mutual_information(std::span<const double> x, std::span<const double> y, std::size_t k,
                              std::uint64_t seed) {
  if (x.size() != y.size())
    throw ShapeError("knn_mutual_information: lengths " + std::to_string(x.size()) + " and " +
                     std::to_string(y.size()) + " differ");
  const std::size_t n = x.size();
  if (k < 1) throw ValidationError("knn_mutual_information: k must be >= 1");
  if (n <= k)
    throw DegenerateInputError("knn_mutual_information: need more than k=" + std::to_string(k) + " samples, got " +
                               std::to_string(n));

  std::vector<double> xs(x.begin(), x.end());
  std::vector<double> ys(y.begin(), y.end());
  if (!standardize(xs) || !standardize(ys)) return 0.0;
  Rng rng(seed);
  for (double& v : xs) v += 1e-10 * rng.normal();
  for (double& v : ys) v += 1e-10 * rng.normal();

  std::vector<double> sorted_x = xs;
  std::vector<double> sorted_y = ys;
  std::sort(sorted_x.begin(), sorted_x.end());
  std::sort(sorted_y.begin(), sorted_y.end());

  std::vector<double> nearest(k);
  double digamma_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(nearest.begin(), nearest.end(), std::numeric_limits<double>::infinity());
    const double xi = xs[i], yi = ys[i];
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double dist = std::max(std::abs(xs[j] - xi), std::abs(ys[j] - yi));
      if (dist < nearest[k - 1]) {
        // insertion into the k smallest distances seen so far
        std::size_t pos = k - 1;
        while (pos > 0 && nearest[pos - 1] > dist) {
          nearest[pos] = nearest[pos - 1];
          --pos;
        }
        nearest[pos] = dist;
      }
    }
    const double radius = nearest[k - 1];
    // the point itself is inside its own ball
    const std::size_t cx = count_within(sorted_x, xi, radius);
    const std::size_t cy = count_within(sorted_y, yi, radius);
    const std::size_t nx = cx > 0 ? cx - 1 : 0;
    const std::size_t ny = cy > 0 ? cy - 1 : 0;
    digamma_sum += boost::math::digamma(static_cast<double>(nx + 1)) + boost::math::digamma(static_cast<double>(ny + 1));
  }
  const double estimate = boost::math::digamma(static_cast<double>(k)) + boost::math::digamma(static_cast<double>(n)) -
                          digamma_sum / static_cast<double>(n);
  return std::max(estimate, 0.0);
}

} // namespace vigor::validation
