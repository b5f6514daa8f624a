#include "vigor/feedback/feedback.hpp"

#include "vigor/error.hpp"
#include "vigor/validation/correlation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace vigor::feedback {

namespace {

std::string fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, value);
  return buf;
}

std::string join(std::span<const std::string> items) {
  if (items.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

double abs_spearman_or_zero(std::span<const double> a, std::span<const double> b) {
  try {
    return std::abs(validation::spearman(a, b).r);
  } catch (const DegenerateInputError&) {
    return 0.0;
  }
}

} // namespace

void FeedbackConfig::validate() const {
  if (!(redundancy_threshold > 0.0)) throw ValidationError("feedback config: redundancy_threshold must be > 0");
  if (!(weak_alignment_threshold > 0.0)) throw ValidationError("feedback config: weak_alignment_threshold must be > 0");
  if (!(hint_correlation_threshold > 0.0)) throw ValidationError("feedback config: hint_correlation_threshold must be > 0");
  if (!(hint_bottom_fraction > 0.0 && hint_bottom_fraction <= 1.0))
    throw ValidationError("feedback config: hint_bottom_fraction must lie in (0, 1]");
}

void to_json(nlohmann::ordered_json& j, const FeedbackConfig& c) {
  j = nlohmann::ordered_json{{"redundancy_threshold", c.redundancy_threshold},
                             {"weak_alignment_threshold", c.weak_alignment_threshold},
                             {"redundancy_uses_seed_spread", c.redundancy_uses_seed_spread},
                             {"hint_correlation_threshold", c.hint_correlation_threshold},
                             {"hint_bottom_fraction", c.hint_bottom_fraction}};
}

void from_json(const nlohmann::ordered_json& j, FeedbackConfig& c) {
  for (const auto& [key, _] : j.items())
    if (key != "redundancy_threshold" && key != "weak_alignment_threshold" && key != "redundancy_uses_seed_spread" &&
        key != "hint_correlation_threshold" && key != "hint_bottom_fraction")
      throw ValidationError("feedback config: unknown key '" + key + "'");
  if (j.contains("redundancy_threshold")) j.at("redundancy_threshold").get_to(c.redundancy_threshold);
  if (j.contains("weak_alignment_threshold")) j.at("weak_alignment_threshold").get_to(c.weak_alignment_threshold);
  if (j.contains("redundancy_uses_seed_spread")) j.at("redundancy_uses_seed_spread").get_to(c.redundancy_uses_seed_spread);
  if (j.contains("hint_correlation_threshold")) j.at("hint_correlation_threshold").get_to(c.hint_correlation_threshold);
  if (j.contains("hint_bottom_fraction")) j.at("hint_bottom_fraction").get_to(c.hint_bottom_fraction);
}

std::string to_string(DiagnosisCode code) {
  switch (code) {
  case DiagnosisCode::Redundant:
    return "REDUNDANT";
  case DiagnosisCode::WeakAlignment:
    return "WEAK_ALIGNMENT";
  case DiagnosisCode::Noise:
    return "NOISE";
  }
  return "UNKNOWN";
}

Diagnosis diagnose(const validation::SignalSummary& signal, const FeedbackConfig& config) {
  Diagnosis out;
  const bool within_spread = config.redundancy_uses_seed_spread && signal.delta_elbo_std &&
                             std::abs(signal.delta_elbo) <= *signal.delta_elbo_std;
  const bool weak = signal.rho_max < config.weak_alignment_threshold;
  if (signal.delta_elbo < config.redundancy_threshold || within_spread) out.codes.push_back(DiagnosisCode::Redundant);
  if (weak) out.codes.push_back(DiagnosisCode::WeakAlignment);
  if (signal.delta_elbo > 0.0 && weak) out.codes.push_back(DiagnosisCode::Noise);

  for (auto code : out.codes) {
    if (!out.text.empty()) out.text += '\n';
    switch (code) {
    case DiagnosisCode::Redundant:
      out.text += kRedundantSentence;
      break;
    case DiagnosisCode::WeakAlignment:
      out.text += kWeakAlignmentSentence;
      break;
    case DiagnosisCode::Noise:
      out.text += kNoiseSentence;
      break;
    }
  }
  if (out.text.empty()) out.text = kNoDeficiencySentence;
  return out;
}

Hints derive_hints(const cevae::LatentPosterior& posterior, const nn::Matrix& covariates,
                   std::span<const std::string> column_names, std::size_t best_dim, const FeedbackConfig& config) {
  const nn::Matrix& mu = posterior.mu;
  if (covariates.rows() != mu.rows())
    throw ShapeError("derive_hints: " + std::to_string(covariates.rows()) + " covariate rows vs " +
                     std::to_string(mu.rows()) + " posterior rows");
  if (column_names.size() != covariates.cols()) throw ShapeError("derive_hints: column name count mismatch");
  if (mu.cols() > 0 && best_dim >= mu.cols()) throw ShapeError("derive_hints: best_dim out of range");

  std::vector<std::vector<double>> latent(mu.cols());
  for (std::size_t j = 0; j < mu.cols(); ++j) latent[j] = mu.column_copy(j);

  Hints hints;
  std::vector<double> strongest(covariates.cols(), 0.0);
  for (std::size_t c = 0; c < covariates.cols(); ++c) {
    const std::vector<double> column = covariates.column_copy(c);
    for (std::size_t j = 0; j < latent.size(); ++j) {
      const double rho = abs_spearman_or_zero(column, latent[j]);
      strongest[c] = std::max(strongest[c], rho);
      if (j == best_dim && rho > config.hint_correlation_threshold) hints.redundant_covariates.push_back(column_names[c]);
    }
  }

  const std::size_t d = covariates.cols();
  if (d == 0) return hints;
  const auto count = std::min<std::size_t>(
      d, std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(config.hint_bottom_fraction * static_cast<double>(d)))));
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return strongest[a] < strongest[b]; });
  for (std::size_t i = 0; i < count; ++i) hints.suggested_domains.push_back("factors related to " + column_names[order[i]]);
  return hints;
}

std::string format_p_value(double p) {
  if (!(p >= 0.0)) return "p=nan";
  if (p >= 1e-4) return "p=" + fixed(p, 4);
  int exponent = 300;
  if (p > 0.0) exponent = std::min(300, static_cast<int>(std::ceil(-std::log10(p))) - 1);
  // ensure the printed bound is strict
  while (exponent > 4 && !(p < std::pow(10.0, -exponent))) --exponent;
  return "p<1e-" + std::to_string(exponent);
}

void to_json(nlohmann::ordered_json& j, const FeedbackMessage& m) {
  std::vector<std::string> codes;
  for (auto c : m.diagnosis_codes) codes.push_back(to_string(c));
  j = nlohmann::ordered_json{{"round", m.round},
                             {"diagnosis_codes", codes},
                             {"exclusion_list", m.exclusion_list},
                             {"redundant_covariates", m.redundant_covariates},
                             {"suggested_domains", m.suggested_domains},
                             {"rendered_text", m.rendered_text}};
}

FeedbackMessage render(const FeedbackInputs& inputs, std::span<const std::string> history_names) {
  std::vector<std::string> missing;
  if (inputs.round < 1) missing.push_back("round");
  if (!inputs.confounder_name || inputs.confounder_name->empty()) missing.push_back("U_name");
  if (!inputs.signal) missing.push_back("signal (delta_elbo, rho_max, p_value, r2)");
  if (!inputs.diagnosis) missing.push_back("diagnosis_text");
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size(); ++i) list += (i ? ", " : "") + missing[i];
    throw RenderError("feedback render: missing field(s): " + list);
  }

  FeedbackMessage msg;
  msg.round = inputs.round;
  msg.diagnosis_codes = inputs.diagnosis->codes;
  msg.redundant_covariates = inputs.hints.redundant_covariates;
  msg.suggested_domains = inputs.hints.suggested_domains;
  for (const auto& name : history_names)
    if (!name.empty() && std::find(msg.exclusion_list.begin(), msg.exclusion_list.end(), name) == msg.exclusion_list.end())
      msg.exclusion_list.push_back(name);

  const auto& s = *inputs.signal;
  std::string text;
  text += "=== VIGOR+ Validation Feedback (Round " + std::to_string(inputs.round) + ") ===\n";
  text += "\n";
  text += "[Previous Attempt]\n";
  text += "- Confounder Name: " + *inputs.confounder_name + "\n";
  text += "- Information Gain (ELBO): " + fixed(s.delta_elbo, 4) + "\n";
  text += "- Max Correlation with Latent z: " + fixed(s.rho_max, 3) + " (" + format_p_value(s.p_value) + ")\n";
  text += "- Predictive R-squared: " + fixed(s.r_squared, 3) + "\n";
  text += "\n";
  text += "[Diagnosis]\n";
  text += inputs.diagnosis->text + "\n";
  text += "\n";
  text += "[Guidance for Next Round]\n";
  text += "1. Avoid generating confounders similar to: " + join(msg.exclusion_list) + "\n";
  text += "2. Consider directions orthogonal to: " + join(msg.redundant_covariates) + "\n";
  text += "3. Suggested semantic domains: " + join(msg.suggested_domains) + "\n";
  text += "\n";
  text += "[Requirements]\n";
  text += "- Generate a NEW confounder different from previous attempts\n";
  text += "- Provide causal explanation linking to treatment and outcome\n";
  text += "- Specify distribution type and parameter inference logic\n";
  msg.rendered_text = std::move(text);
  return msg;
}

} // namespace vigor::feedback
