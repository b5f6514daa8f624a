#pragma once

#include "vigor/loop/config.hpp"

#include <span>
#include <string>

namespace vigor::loop {

enum class Decision { Success, MaxIters, Diminishing, Continue };

std::string to_string(Decision decision);

/// What the stopping rule needs from one round. A failed round (generator
/// error) has no signal.
struct RoundSignal {
  bool failed = false;
  double delta_elbo = 0.0;
  double rho_max = 0.0;
};

/// Decision after the latest round (k = history.size()). SUCCESS needs both
/// delta > tau_elbo and rho > tau_rho; otherwise MAX_ITERS once k >= k_max;
/// otherwise DIMINISHING when the last m consecutive round-to-round changes
/// in delta are all below epsilon (a failed round breaks the chain).
Decision check_convergence(std::span<const RoundSignal> history, const LoopConfig& config);

} // namespace vigor::loop
