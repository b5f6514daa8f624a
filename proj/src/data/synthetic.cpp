#include "vigor/data/synthetic.hpp"

#include "vigor/error.hpp"
#include "vigor/nn/layers.hpp"
#include "vigor/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vigor::data {

namespace {
enum Stream : std::uint64_t { kCoefficients = 1, kConfounder, kCovariates, kTreatment, kOutcome };
}

void SyntheticSpec::validate() const {
  if (n < 100) throw ValidationError("synthetic: n must be >= 100, got " + std::to_string(n));
  if (d < 1) throw ValidationError("synthetic: d must be >= 1");
  if (!(leakage >= 0.0 && leakage <= 1.0)) throw ValidationError("synthetic: leakage must lie in [0, 1]");
  for (double v : {a_t, a_y, tau, outcome_bias, covariate_effect_scale})
    if (!std::isfinite(v)) throw ValidationError("synthetic: strengths must be finite");
}

SyntheticResult generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  SyntheticResult result;
  auto& coef = result.coefficients;

  Rng coef_rng(derive_seed(spec.seed, kCoefficients));
  coef.w.resize(spec.d);
  coef.v.resize(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) coef.w[j] = (2.0 * coef_rng.uniform() - 1.0) * spec.covariate_effect_scale;
  for (std::size_t j = 0; j < spec.d; ++j) coef.v[j] = (2.0 * coef_rng.uniform() - 1.0) * spec.covariate_effect_scale;

  Rng u_rng(derive_seed(spec.seed, kConfounder));
  std::vector<double> u(spec.n);
  for (double& v : u) v = u_rng.normal();

  Rng x_rng(derive_seed(spec.seed, kCovariates));
  nn::Matrix raw(spec.n, spec.d);
  for (std::size_t i = 0; i < spec.n; ++i)
    for (std::size_t j = 0; j < spec.d; ++j) raw(i, j) = spec.leakage * u[i] + (1.0 - spec.leakage) * x_rng.normal();
  nn::Matrix x = Standardizer::fit(raw).apply(raw);

  Rng t_rng(derive_seed(spec.seed, kTreatment));
  Rng y_rng(derive_seed(spec.seed, kOutcome));
  std::vector<double> t(spec.n);
  std::vector<double> y(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    double wx = 0.0, vx = 0.0;
    for (std::size_t j = 0; j < spec.d; ++j) {
      wx += coef.w[j] * x(i, j);
      vx += coef.v[j] * x(i, j);
    }
    t[i] = t_rng.bernoulli(nn::sigmoid(spec.a_t * u[i] + wx)) ? 1.0 : 0.0;
    y[i] = y_rng.bernoulli(nn::sigmoid(spec.outcome_bias + spec.tau * t[i] + spec.a_y * u[i] + vx)) ? 1.0 : 0.0;
  }

  Dataset& ds = result.dataset;
  ds.x = std::move(x);
  ds.t = std::move(t);
  ds.y = std::move(y);
  for (std::size_t j = 0; j < spec.d; ++j) ds.column_names.push_back("x" + std::to_string(j + 1));
  ds.true_ate = synthetic_true_ate(spec, coef, ds.x, u);
  ds.u_star = std::move(u);
  ds.validate();
  return result;
}

double synthetic_true_ate(const SyntheticSpec& spec, const SyntheticCoefficients& coefficients, const nn::Matrix& x,
                          std::span<const double> u_star) {
  if (x.rows() != u_star.size() || coefficients.v.size() != x.cols())
    throw ShapeError("synthetic_true_ate: inconsistent shapes");
  double sum = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double vx = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) vx += coefficients.v[j] * x(i, j);
    const double base = spec.outcome_bias + spec.a_y * u_star[i] + vx;
    sum += nn::sigmoid(base + spec.tau) - nn::sigmoid(base);
  }
  return sum / static_cast<double>(x.rows());
}

void to_json(nlohmann::ordered_json& j, const SyntheticSpec& s) {
  j = nlohmann::ordered_json{{"n", s.n},
                             {"d", s.d},
                             {"a_t", s.a_t},
                             {"a_y", s.a_y},
                             {"tau", s.tau},
                             {"leakage", s.leakage},
                             {"outcome_bias", s.outcome_bias},
                             {"covariate_effect_scale", s.covariate_effect_scale},
                             {"seed", s.seed}};
}

void from_json(const nlohmann::ordered_json& j, SyntheticSpec& s) {
  static const char* known[] = {"n", "d", "a_t", "a_y", "tau", "leakage", "outcome_bias", "covariate_effect_scale", "seed"};
  for (const auto& [key, _] : j.items())
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      throw ValidationError("synthetic spec: unknown key '" + key + "'");
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("n", s.n);
  get("d", s.d);
  get("a_t", s.a_t);
  get("a_y", s.a_y);
  get("tau", s.tau);
  get("leakage", s.leakage);
  get("outcome_bias", s.outcome_bias);
  get("covariate_effect_scale", s.covariate_effect_scale);
  get("seed", s.seed);
}

GroundTruth ground_truth_of(const SyntheticResult& result, const SyntheticSpec& spec) {
  if (!result.dataset.u_star || !result.dataset.true_ate) throw ValidationError("ground truth: dataset is not synthetic");
  return GroundTruth{spec, result.coefficients, *result.dataset.true_ate, *result.dataset.u_star};
}

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& path) {
  nlohmann::ordered_json j{{"format", "vigor-ground-truth"},
                           {"spec", truth.spec},
                           {"coefficients", {{"w", truth.coefficients.w}, {"v", truth.coefficients.v}}},
                           {"true_ate", truth.true_ate},
                           {"u_star", truth.u_star}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string{}) != "vigor-ground-truth") throw ParseError(path.string() + ": not a ground-truth file");
  GroundTruth truth;
  from_json(j.at("spec"), truth.spec);
  j.at("coefficients").at("w").get_to(truth.coefficients.w);
  j.at("coefficients").at("v").get_to(truth.coefficients.v);
  j.at("true_ate").get_to(truth.true_ate);
  j.at("u_star").get_to(truth.u_star);
  return truth;
}

} // namespace vigor::data
