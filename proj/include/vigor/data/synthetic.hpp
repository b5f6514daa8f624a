#pragma once

#include "vigor/data/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace vigor::data {

/// Planted-confounder benchmark parameters.
struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t d = 6;
  double a_t = 2.0;          ///< log-odds effect of U* on T
  double a_y = 2.0;          ///< log-odds effect of U* on Y
  double tau = 0.0;          ///< log-odds treatment effect on Y
  double leakage = 0.0;      ///< lambda: share of U* mixed into each covariate
  double outcome_bias = 0.0; ///< b0
  double covariate_effect_scale = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Generated coefficients, needed to recompute true_ate from a saved dataset.
struct SyntheticCoefficients {
  std::vector<double> w; ///< covariate effects on T
  std::vector<double> v; ///< covariate effects on Y
};

struct SyntheticResult {
  Dataset dataset; ///< has u_star and true_ate set
  SyntheticCoefficients coefficients;
};

/// U* ~ N(0,1); X_j = lambda U* + (1 - lambda) e_j, then standardised;
/// T ~ Bernoulli(sigmoid(a_t U* + w.X)); Y ~ Bernoulli(sigmoid(b0 + tau T + a_y U* + v.X)).
SyntheticResult generate_synthetic(const SyntheticSpec& spec);

/// Population-average sigmoid difference
/// mean_i[sigmoid(b0 + tau + a_y u_i + v.x_i) - sigmoid(b0 + a_y u_i + v.x_i)].
double synthetic_true_ate(const SyntheticSpec& spec, const SyntheticCoefficients& coefficients, const nn::Matrix& x,
                          std::span<const double> u_star);

void to_json(nlohmann::ordered_json& j, const SyntheticSpec& s);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::ordered_json& j, SyntheticSpec& s);

/// Hidden sidecar of a synthetic dataset: everything needed to recompute
/// true_ate from the saved covariates. Never given to models or generators.
struct GroundTruth {
  SyntheticSpec spec;
  SyntheticCoefficients coefficients;
  double true_ate = 0.0;
  std::vector<double> u_star;
};

GroundTruth ground_truth_of(const SyntheticResult& result, const SyntheticSpec& spec);
void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

} // namespace vigor::data
