#include "vigor/nn/layers.hpp"

#include "vigor/error.hpp"

#include <algorithm>
#include <cmath>

namespace vigor::nn {

LinearLayer::LinearLayer(std::size_t in_dim, std::size_t out_dim)
    : weight_(out_dim, in_dim), bias_(out_dim, 0.0), grad_weight_(out_dim, in_dim), grad_bias_(out_dim, 0.0) {}

void LinearLayer::init_glorot(Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim() + out_dim()));
  for (double& w : weight_.data()) w = (2.0 * rng.uniform() - 1.0) * bound;
  std::fill(bias_.begin(), bias_.end(), 0.0);
}

Matrix LinearLayer::forward(const Matrix& input) {
  if (input.cols() != in_dim())
    throw ShapeError("linear_forward: input " + input.shape_string() + " does not match weight " +
                     weight_.shape_string() + " (expected " + std::to_string(in_dim()) + " input columns)");
  Matrix out = matmul_bt(input, weight_);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias_[c];
  }
  cached_input_ = input;
  return out;
}

Matrix LinearLayer::backward(const Matrix& grad_out) {
  if (!cached_input_) throw StateError("linear_backward called before linear_forward");
  const Matrix& input = *cached_input_;
  if (grad_out.rows() != input.rows() || grad_out.cols() != out_dim())
    throw ShapeError("linear_backward: grad_out " + grad_out.shape_string() + " does not match forward output " +
                     std::to_string(input.rows()) + "x" + std::to_string(out_dim()));
  const Matrix gw = matmul_at(grad_out, input);
  auto dst = grad_weight_.data();
  const auto src = gw.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  for (std::size_t r = 0; r < grad_out.rows(); ++r) {
    const auto row = grad_out.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) grad_bias_[c] += row[c];
  }
  return matmul(grad_out, weight_);
}

void LinearLayer::widen_input(std::size_t extra) {
  const std::size_t old_in = in_dim();
  Matrix widened(out_dim(), old_in + extra);
  for (std::size_t r = 0; r < out_dim(); ++r) {
    const auto src = weight_.row(r);
    std::copy(src.begin(), src.end(), widened.row(r).begin());
  }
  weight_ = std::move(widened);
  grad_weight_ = Matrix(out_dim(), old_in + extra);
  cached_input_.reset();
}

void LinearLayer::zero_grad() {
  std::fill(grad_weight_.data().begin(), grad_weight_.data().end(), 0.0);
  std::fill(grad_bias_.begin(), grad_bias_.end(), 0.0);
}

void LinearLayer::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".weight", weight_.data(), grad_weight_.data()});
  out.push_back({prefix + ".bias", bias_, grad_bias_});
}

Matrix ReluLayer::forward(const Matrix& input) {
  Matrix out = input;
  rows_ = input.rows();
  cols_ = input.cols();
  mask_.assign(input.size(), 0);
  auto data = out.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] > 0.0) {
      mask_[i] = 1;
    } else {
      data[i] = 0.0;
    }
  }
  return out;
}

Matrix ReluLayer::backward(const Matrix& grad_out) const {
  if (grad_out.rows() != rows_ || grad_out.cols() != cols_)
    throw ShapeError("relu_backward: grad_out " + grad_out.shape_string() + " does not match forward shape");
  Matrix grad_in = grad_out;
  auto data = grad_in.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (!mask_[i]) data[i] = 0.0;
  return grad_in;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix SigmoidLayer::forward(const Matrix& input) {
  output_ = Matrix(input.rows(), input.cols());
  clamped_.assign(input.size(), 0);
  const auto in = input.data();
  auto out = output_.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double s = sigmoid(in[i]);
    const double c = std::clamp(s, kProbabilityClamp, 1.0 - kProbabilityClamp);
    clamped_[i] = c != s;
    out[i] = c;
  }
  return output_;
}

Matrix SigmoidLayer::backward(const Matrix& grad_out) const {
  if (grad_out.rows() != output_.rows() || grad_out.cols() != output_.cols())
    throw ShapeError("sigmoid_backward: grad_out " + grad_out.shape_string() + " does not match forward shape");
  Matrix grad_in(grad_out.rows(), grad_out.cols());
  const auto g = grad_out.data();
  const auto s = output_.data();
  auto dst = grad_in.data();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] = clamped_[i] ? 0.0 : g[i] * s[i] * (1.0 - s[i]);
  return grad_in;
}

BatchNormLayer::BatchNormLayer(std::size_t dim, BatchNormOptions options)
    : options_(options), gamma_(dim, 1.0), beta_(dim, 0.0), running_mean_(dim, 0.0), running_var_(dim, 1.0),
      grad_gamma_(dim, 0.0), grad_beta_(dim, 0.0) {}

Matrix BatchNormLayer::forward(const Matrix& input, bool training) {
  const std::size_t n = input.rows();
  const std::size_t d = dim();
  if (input.cols() != d)
    throw ShapeError("batchnorm_forward: input " + input.shape_string() + " does not match feature dim " +
                     std::to_string(d));
  if (training && n < 2) throw ValidationError("batchnorm_forward: training mode requires batch size >= 2, got " + std::to_string(n));

  normalized_ = Matrix(n, d);
  inv_std_.assign(d, 0.0);
  Matrix out(n, d);

  if (training) {
    std::vector<double> mean(d, 0.0);
    std::vector<double> var(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = input.row(r);
      for (std::size_t c = 0; c < d; ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = input.row(r);
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = row[c] - mean[c];
        var[c] += diff * diff;
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      const double biased = var[c] / static_cast<double>(n);
      const double unbiased = var[c] / static_cast<double>(n - 1);
      inv_std_[c] = 1.0 / std::sqrt(biased + options_.epsilon);
      running_mean_[c] = (1.0 - options_.momentum) * running_mean_[c] + options_.momentum * mean[c];
      running_var_[c] = (1.0 - options_.momentum) * running_var_[c] + options_.momentum * unbiased;
      var[c] = biased;
    }
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = input.row(r);
      auto norm = normalized_.row(r);
      auto dst = out.row(r);
      for (std::size_t c = 0; c < d; ++c) {
        norm[c] = (row[c] - mean[c]) * inv_std_[c];
        dst[c] = gamma_[c] * norm[c] + beta_[c];
      }
    }
  } else {
    for (std::size_t c = 0; c < d; ++c) inv_std_[c] = 1.0 / std::sqrt(running_var_[c] + options_.epsilon);
    for (std::size_t r = 0; r < n; ++r) {
      const auto row = input.row(r);
      auto norm = normalized_.row(r);
      auto dst = out.row(r);
      for (std::size_t c = 0; c < d; ++c) {
        norm[c] = (row[c] - running_mean_[c]) * inv_std_[c];
        dst[c] = gamma_[c] * norm[c] + beta_[c];
      }
    }
  }
  cached_training_ = training;
  has_cache_ = true;
  return out;
}

Matrix BatchNormLayer::backward(const Matrix& grad_out) {
  if (!has_cache_) throw StateError("batchnorm_backward called before batchnorm_forward");
  const std::size_t n = normalized_.rows();
  const std::size_t d = dim();
  if (grad_out.rows() != n || grad_out.cols() != d)
    throw ShapeError("batchnorm_backward: grad_out " + grad_out.shape_string() + " does not match forward output " +
                     normalized_.shape_string());

  std::vector<double> sum_g(d, 0.0);
  std::vector<double> sum_g_xhat(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const auto g = grad_out.row(r);
    const auto xh = normalized_.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      sum_g[c] += g[c];
      sum_g_xhat[c] += g[c] * xh[c];
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    grad_beta_[c] += sum_g[c];
    grad_gamma_[c] += sum_g_xhat[c];
  }

  Matrix grad_in(n, d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto g = grad_out.row(r);
    const auto xh = normalized_.row(r);
    auto dst = grad_in.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double scale = gamma_[c] * inv_std_[c];
      if (cached_training_) {
        dst[c] = scale * (g[c] - inv_n * sum_g[c] - xh[c] * inv_n * sum_g_xhat[c]);
      } else {
        dst[c] = scale * g[c];
      }
    }
  }
  return grad_in;
}

void BatchNormLayer::zero_grad() {
  std::fill(grad_gamma_.begin(), grad_gamma_.end(), 0.0);
  std::fill(grad_beta_.begin(), grad_beta_.end(), 0.0);
}

void BatchNormLayer::collect(std::vector<ParamRef>& out, const std::string& prefix) {
  out.push_back({prefix + ".gamma", gamma_, grad_gamma_});
  out.push_back({prefix + ".beta", beta_, grad_beta_});
}

} // namespace vigor::nn
