#include "vigor/loop/convergence.hpp"

#include "vigor/error.hpp"

#include <cmath>

namespace vigor::loop {

std::string to_string(Decision decision) {
  switch (decision) {
  case Decision::Success:
    return "SUCCESS";
  case Decision::MaxIters:
    return "MAX_ITERS";
  case Decision::Diminishing:
    return "DIMINISHING";
  case Decision::Continue:
    return "CONTINUE";
  }
  return "UNKNOWN";
}

Decision check_convergence(std::span<const RoundSignal> history, const LoopConfig& config) {
  if (history.empty()) throw ValidationError("check_convergence: empty history");
  const auto& latest = history.back();
  if (!latest.failed && latest.delta_elbo > config.tau_elbo && latest.rho_max > config.tau_rho) return Decision::Success;
  const std::size_t k = history.size();
  if (k >= config.k_max) return Decision::MaxIters;
  if (k >= config.m + 1) {
    bool small = true;
    for (std::size_t j = k - config.m; j < k && small; ++j) {
      const auto& cur = history[j];
      const auto& prev = history[j - 1];
      small = !cur.failed && !prev.failed && std::abs(cur.delta_elbo - prev.delta_elbo) < config.epsilon;
    }
    if (small) return Decision::Diminishing;
  }
  return Decision::Continue;
}

} // namespace vigor::loop
