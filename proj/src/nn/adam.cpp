#include "vigor/nn/adam.hpp"

#include "vigor/error.hpp"

#include <cmath>

namespace vigor::nn {

void AdamState::step(std::span<const ParamRef> params) {
  if (m_.empty()) {
    m_.reserve(params.size());
    v_.reserve(params.size());
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  if (m_.size() != params.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameter blocks, state has " +
                     std::to_string(m_.size()));
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    if (p.grad.size() != p.value.size() || m_[b].size() != p.value.size())
      throw ShapeError("adam_step: shape mismatch in parameter block '" + p.name + "'");
    for (double g : p.grad)
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in parameter block '" + p.name + "'");
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    const auto& p = params[b];
    auto& m = m_[b];
    auto& v = v_[b];
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = options_.beta1 * m[i] + (1.0 - options_.beta1) * g;
      v[i] = options_.beta2 * v[i] + (1.0 - options_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p.value[i] -= options_.learning_rate * m_hat / (std::sqrt(v_hat) + options_.epsilon);
    }
  }
}

void AdamState::restore(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v) {
  if (m.size() != v.size()) throw ShapeError("adam restore: moment block counts differ");
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

} // namespace vigor::nn
