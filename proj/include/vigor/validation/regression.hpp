#pragma once

#include "vigor/nn/matrix.hpp"

#include <span>

namespace vigor::validation {

struct R2Result {
  double r_squared = 0.0;
  std::size_t rank = 0;        ///< numerical rank of the design [1, z]
  bool rank_deficient = false; ///< solved through the pseudo-inverse
};

/// In-sample R^2 of the least-squares fit u ~ 1 + z. The design is solved by
/// SVD with relative singular-value tolerance 1e-10, so rank-deficient
/// designs fall back to the minimum-norm solution. A constant u gives 0.
/// Requires n > z.cols() + 1.
R2Result predictive_r2(const nn::Matrix& z, std::span<const double> u);

} // namespace vigor::validation
