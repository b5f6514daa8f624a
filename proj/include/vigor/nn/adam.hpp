#pragma once

#include "vigor/nn/layers.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace vigor::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moment estimates.
class AdamState {
public:
  AdamState() = default;
  explicit AdamState(AdamOptions options) : options_(options) {}

  /// One update over every parameter block. Moment buffers are created on the
  /// first call and must keep the same block layout afterwards. Throws
  /// NumericError naming the block if a gradient is not finite; no parameter
  /// is modified in that case.
  void step(std::span<const ParamRef> params);

  std::uint64_t steps() const { return t_; }
  const AdamOptions& options() const { return options_; }

  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  /// Restores accumulators (checkpoint load).
  void restore(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v);

private:
  AdamOptions options_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

} // namespace vigor::nn
