#pragma once

#include "vigor/nn/matrix.hpp"
#include "vigor/rng.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vigor::nn {

/// A named parameter block with its gradient buffer, used by the optimiser,
/// gradient checks and checkpointing.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

/// Fully connected layer computing input * weight^T + bias.
class LinearLayer {
public:
  LinearLayer() = default;
  LinearLayer(std::size_t in_dim, std::size_t out_dim);

  /// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero bias.
  void init_glorot(Rng& rng);

  Matrix forward(const Matrix& input);
  Matrix backward(const Matrix& grad_out);

  /// Appends `extra` zero-initialised input columns on the right.
  void widen_input(std::size_t extra);

  void zero_grad();
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  std::size_t in_dim() const { return weight_.cols(); }
  std::size_t out_dim() const { return weight_.rows(); }

  Matrix& weight() { return weight_; }
  const Matrix& weight() const { return weight_; }
  std::vector<double>& bias() { return bias_; }
  const std::vector<double>& bias() const { return bias_; }
  const Matrix& grad_weight() const { return grad_weight_; }
  const std::vector<double>& grad_bias() const { return grad_bias_; }

private:
  Matrix weight_;
  std::vector<double> bias_;
  Matrix grad_weight_;
  std::vector<double> grad_bias_;
  std::optional<Matrix> cached_input_;
};

class ReluLayer {
public:
  Matrix forward(const Matrix& input);
  Matrix backward(const Matrix& grad_out) const;

  /// Pre-activation sign pattern from the last forward (1 = active).
  const std::vector<unsigned char>& mask() const { return mask_; }

private:
  std::vector<unsigned char> mask_;
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
};

inline constexpr double kProbabilityClamp = 1e-7;

double sigmoid(double x);

/// Elementwise logistic function. The cached output is clamped to
/// [1e-7, 1 - 1e-7]; the clamp only matters for log-likelihoods.
class SigmoidLayer {
public:
  Matrix forward(const Matrix& input);
  /// Local derivative s(1 - s) of the unclamped output; zero where the clamp was active.
  Matrix backward(const Matrix& grad_out) const;

  const Matrix& output() const { return output_; }

private:
  Matrix output_;
  std::vector<unsigned char> clamped_;
};

struct BatchNormOptions {
  double momentum = 0.1;
  double epsilon = 1e-5;
};

/// Per-feature batch normalisation with learned affine transform.
///
/// Training mode normalises with biased batch statistics and updates running
/// estimates (running_var uses the unbiased batch variance). Eval mode uses
/// only the running statistics.
class BatchNormLayer {
public:
  BatchNormLayer() = default;
  explicit BatchNormLayer(std::size_t dim, BatchNormOptions options = {});

  Matrix forward(const Matrix& input, bool training);
  Matrix backward(const Matrix& grad_out);

  void zero_grad();
  void collect(std::vector<ParamRef>& out, const std::string& prefix);

  std::size_t dim() const { return gamma_.size(); }
  const BatchNormOptions& options() const { return options_; }

  std::vector<double>& gamma() { return gamma_; }
  std::vector<double>& beta() { return beta_; }
  std::vector<double>& running_mean() { return running_mean_; }
  std::vector<double>& running_var() { return running_var_; }
  const std::vector<double>& gamma() const { return gamma_; }
  const std::vector<double>& beta() const { return beta_; }
  const std::vector<double>& running_mean() const { return running_mean_; }
  const std::vector<double>& running_var() const { return running_var_; }

private:
  BatchNormOptions options_;
  std::vector<double> gamma_;
  std::vector<double> beta_;
  std::vector<double> running_mean_;
  std::vector<double> running_var_;
  std::vector<double> grad_gamma_;
  std::vector<double> grad_beta_;

  // backward cache
  bool cached_training_ = false;
  bool has_cache_ = false;
  Matrix normalized_;
  std::vector<double> inv_std_;
};

} // namespace vigor::nn
