#include "vigor/data/split.hpp"

#include "vigor/error.hpp"
#include "vigor/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace vigor::data {

Split split_indices(std::span<const double> treatment, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ValidationError("split: fraction must lie in [0, 1]");
  const std::size_t n = treatment.size();
  std::array<std::vector<std::size_t>, 2> strata;
  for (std::size_t i = 0; i < n; ++i) strata[treatment[i] == 1.0 ? 1 : 0].push_back(i);

  Rng rng(seed);
  for (auto& s : strata) rng.shuffle(s);

  const auto total_eval = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::array<std::size_t, 2> take{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < 2; ++g) {
    const double exact = fraction * static_cast<double>(strata[g].size());
    take[g] = static_cast<std::size_t>(std::floor(exact));
    remainder[g] = exact - static_cast<double>(take[g]);
    assigned += take[g];
  }
  while (assigned < total_eval) {
    // largest remainder first; ties go to the larger stratum, then to control
    std::size_t g = remainder[1] > remainder[0] || (remainder[1] == remainder[0] && strata[1].size() > strata[0].size()) ? 1 : 0;
    if (take[g] >= strata[g].size()) g = 1 - g;
    ++take[g];
    remainder[g] = -1.0;
    ++assigned;
  }

  Split out;
  for (std::size_t g = 0; g < 2; ++g) {
    out.eval.insert(out.eval.end(), strata[g].begin(), strata[g].begin() + static_cast<std::ptrdiff_t>(take[g]));
    out.train.insert(out.train.end(), strata[g].begin() + static_cast<std::ptrdiff_t>(take[g]), strata[g].end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.eval.begin(), out.eval.end());
  return out;
}

DatasetSplit split(const Dataset& dataset, double fraction, std::uint64_t seed) {
  DatasetSplit out;
  out.indices = split_indices(dataset.t, fraction, seed);
  out.train = dataset.subset(out.indices.train);
  out.eval = dataset.subset(out.indices.eval);
  return out;
}

} // namespace vigor::data
