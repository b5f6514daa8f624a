#include "vigor/validation/signal.hpp"

#include "vigor/error.hpp"
#include "vigor/rng.hpp"
#include "vigor/validation/mutual_information.hpp"
#include "vigor/validation/regression.hpp"

#include <algorithm>
#include <cmath>

namespace vigor::validation {

double info_gain(double elbo_augmented, double elbo_baseline) { return elbo_augmented - elbo_baseline; }

double info_gain(const cevae::ElboReport& augmented, const cevae::ElboReport& baseline) {
  return info_gain(augmented.elbo, baseline.elbo);
}

ValidationSignal build_signal(const cevae::ElboReport& baseline, const cevae::ElboReport& augmented,
                              const cevae::LatentPosterior& posterior, std::span<const double> u,
                              const SignalOptions& options) {
  const nn::Matrix& mu = posterior.mu;
  if (mu.rows() != u.size())
    throw ShapeError("build_signal: posterior has " + std::to_string(mu.rows()) + " rows, candidate has " +
                     std::to_string(u.size()) + " values");

  ValidationSignal s;
  s.baseline_elbo = baseline.elbo;
  s.augmented_elbo = augmented.elbo;
  s.delta_elbo = info_gain(augmented, baseline);
  s.degenerate_candidate = u.empty() || std::all_of(u.begin(), u.end(), [&](double v) { return v == u.front(); });

  for (std::size_t j = 0; j < mu.cols(); ++j) {
    const std::vector<double> column = mu.column_copy(j);
    DimensionConsistency d;
    d.dim = j;
    if (!s.degenerate_candidate) {
      try {
        const auto pr = pearson(column, u);
        d.pearson = pr.r;
        d.pearson_p = pr.p_value;
      } catch (const DegenerateInputError&) {
      }
      try {
        const auto sr = spearman(column, u);
        d.spearman = sr.r;
        d.spearman_p = sr.p_value;
      } catch (const DegenerateInputError&) {
      }
      d.mi = knn_mutual_information(column, u, options.mi_neighbors, derive_seed(options.mi_seed, j));
    }
    s.per_dim.push_back(d);
  }

  double mi_sum = 0.0;
  for (const auto& d : s.per_dim) {
    if (std::abs(d.spearman) > s.rho_max) {
      s.rho_max = std::abs(d.spearman);
      s.best_dim = d.dim;
    }
    mi_sum += d.mi;
  }
  if (!s.per_dim.empty()) {
    s.i_avg = mi_sum / static_cast<double>(s.per_dim.size());
    s.best_p_value = s.per_dim[s.best_dim].spearman_p;
  }

  const auto r2 = predictive_r2(mu, u);
  s.r_squared = r2.r_squared;
  s.r2_rank_deficient = r2.rank_deficient;
  return s;
}

SignalSummary summarize(const ValidationSignal& signal) {
  SignalSummary out;
  out.delta_elbo = signal.delta_elbo;
  out.rho_max = signal.rho_max;
  out.p_value = signal.best_p_value;
  out.i_avg = signal.i_avg;
  out.r_squared = signal.r_squared;
  return out;
}

SignalSummary aggregate(std::span<const ValidationSignal> per_seed) {
  if (per_seed.empty()) throw ValidationError("aggregate: no per-seed signals");
  const double n = static_cast<double>(per_seed.size());
  SignalSummary out;
  std::vector<double> p_values;
  for (const auto& s : per_seed) {
    out.delta_elbo += s.delta_elbo / n;
    out.rho_max += s.rho_max / n;
    out.i_avg += s.i_avg / n;
    out.r_squared += s.r_squared / n;
    p_values.push_back(s.best_p_value);
  }
  if (per_seed.size() > 1) {
    double ss = 0.0;
    for (const auto& s : per_seed) ss += (s.delta_elbo - out.delta_elbo) * (s.delta_elbo - out.delta_elbo);
    out.delta_elbo_std = std::sqrt(ss / (n - 1.0));
  }
  std::sort(p_values.begin(), p_values.end());
  const std::size_t mid = p_values.size() / 2;
  out.p_value = p_values.size() % 2 == 1 ? p_values[mid] : 0.5 * (p_values[mid - 1] + p_values[mid]);
  return out;
}

void to_json(nlohmann::ordered_json& j, const DimensionConsistency& d) {
  j = nlohmann::ordered_json{{"dim", d.dim},           {"pearson", d.pearson},   {"pearson_p", d.pearson_p},
                             {"spearman", d.spearman}, {"spearman_p", d.spearman_p}, {"mi", d.mi}};
}

void to_json(nlohmann::ordered_json& j, const ValidationSignal& s) {
  j = nlohmann::ordered_json{{"delta_elbo", s.delta_elbo},
                             {"rho_max", s.rho_max},
                             {"i_avg", s.i_avg},
                             {"r_squared", s.r_squared},
                             {"best_dim", s.best_dim},
                             {"best_p_value", s.best_p_value},
                             {"baseline_elbo", s.baseline_elbo},
                             {"augmented_elbo", s.augmented_elbo},
                             {"degenerate_candidate", s.degenerate_candidate},
                             {"r2_rank_deficient", s.r2_rank_deficient},
                             {"per_dim", s.per_dim}};
}

void to_json(nlohmann::ordered_json& j, const SignalSummary& s) {
  j = nlohmann::ordered_json{{"delta_elbo", s.delta_elbo}};
  j["delta_elbo_std"] = s.delta_elbo_std ? nlohmann::ordered_json(*s.delta_elbo_std) : nlohmann::ordered_json(nullptr);
  j["rho_max"] = s.rho_max;
  j["p_value"] = s.p_value;
  j["i_avg"] = s.i_avg;
  j["r_squared"] = s.r_squared;
}

} // namespace vigor::validation
