#pragma once

#include "vigor/cevae/model.hpp"
#include "vigor/validation/correlation.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vigor::validation {

/// Information gain: augmented ELBO minus baseline ELBO. Both reports must
/// come from the same held-out rows under the same evaluation protocol.
double info_gain(double elbo_augmented, double elbo_baseline);
double info_gain(const cevae::ElboReport& augmented, const cevae::ElboReport& baseline);

/// Consistency of one latent dimension (posterior mean) with the candidate.
struct DimensionConsistency {
  std::size_t dim = 0;
  double pearson = 0.0;
  double pearson_p = 1.0;
  double spearman = 0.0;
  double spearman_p = 1.0;
  double mi = 0.0; ///< nats
};

/// The per-round signal: information gain, best absolute Spearman
/// correlation, mean kNN mutual information and predictive R^2.
struct ValidationSignal {
  double delta_elbo = 0.0;
  double rho_max = 0.0;
  double i_avg = 0.0;
  double r_squared = 0.0;
  std::size_t best_dim = 0;
  double best_p_value = 1.0; ///< Spearman p-value of best_dim
  double baseline_elbo = 0.0;
  double augmented_elbo = 0.0;
  bool degenerate_candidate = false; ///< constant candidate; correlations reported as 0
  bool r2_rank_deficient = false;
  std::vector<DimensionConsistency> per_dim;
};

struct SignalOptions {
  std::size_t mi_neighbors = 3;
  std::uint64_t mi_seed = 0;
};

/// Assembles the signal from the two held-out ELBO reports and the baseline
/// model's posterior means on the same rows.
ValidationSignal build_signal(const cevae::ElboReport& baseline, const cevae::ElboReport& augmented,
                              const cevae::LatentPosterior& posterior, std::span<const double> u,
                              const SignalOptions& options = {});

/// Scalars the feedback and convergence logic act on. For multi-seed runs
/// these are means over seeds and `delta_elbo_std` is the sample standard
/// deviation of the per-seed gains.
struct SignalSummary {
  double delta_elbo = 0.0;
  std::optional<double> delta_elbo_std;
  double rho_max = 0.0;
  double p_value = 1.0;
  double i_avg = 0.0;
  double r_squared = 0.0;
};

SignalSummary summarize(const ValidationSignal& signal);

/// Mean of per-seed signals; p_value is the median of per-seed best p-values.
SignalSummary aggregate(std::span<const ValidationSignal> per_seed);

void to_json(nlohmann::ordered_json& j, const DimensionConsistency& d);
void to_json(nlohmann::ordered_json& j, const ValidationSignal& s);
void to_json(nlohmann::ordered_json& j, const SignalSummary& s);

} // namespace vigor::validation
