#pragma once

#include "vigor/data/dataset.hpp"

#include <cstdint>
#include <vector>

namespace vigor::data {

/// Row indices of a train/eval partition (each sorted ascending).
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> eval;
};

/// Seeded split stratified on T. The eval part holds round(fraction * n) rows;
/// per-stratum counts use largest-remainder rounding so the treated share of
/// both parts stays as close as the counts allow.
Split split_indices(std::span<const double> treatment, double fraction, std::uint64_t seed);

struct DatasetSplit {
  Dataset train;
  Dataset eval;
  Split indices;
};

DatasetSplit split(const Dataset& dataset, double fraction, std::uint64_t seed);

} // namespace vigor::data
