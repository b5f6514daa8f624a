#pragma once

#include <cstdint>
#include <span>

namespace vigor::validation {

/// Kraskov-Stoegbauer-Grassberger estimator (variant 1) of I(X; Y) in nats.
///
/// Both inputs are standardised to zero mean and unit variance, then jittered
/// by 1e-10 times standard normal noise drawn from `seed` to break exact ties.
/// Neighbourhoods use the max-norm in the joint space. The result is clamped
/// at zero. A constant input carries no information and yields 0.
/// Requires n > k >= 1.
double knn_mutual_information(std::span<const double> x, std::span<const double> y, std::size_t k = 3,
                              std::uint64_t seed = 0);

} // namespace vigor::validation
