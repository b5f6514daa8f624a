#pragma once

#include "vigor/cevae/model.hpp"
#include "vigor/nn/matrix.hpp"
#include "vigor/validation/signal.hpp"

#include <json.hpp>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vigor::feedback {

struct FeedbackConfig {
  double redundancy_threshold = 0.001;
  double weak_alignment_threshold = 0.1;
  /// Also report redundancy when the gain lies within one across-seed
  /// standard deviation of zero.
  bool redundancy_uses_seed_spread = true;
  double hint_correlation_threshold = 0.3;
  double hint_bottom_fraction = 0.25;

  void validate() const;
};

void to_json(nlohmann::ordered_json& j, const FeedbackConfig& c);
void from_json(const nlohmann::ordered_json& j, FeedbackConfig& c);

enum class DiagnosisCode { Redundant, WeakAlignment, Noise };

std::string to_string(DiagnosisCode code);

inline constexpr const char* kRedundantSentence =
    "The generated confounder is statistically redundant with observed covariates.";
inline constexpr const char* kWeakAlignmentSentence =
    "The confounder shows weak alignment with data-driven latent factors.";
inline constexpr const char* kNoiseSentence = "The confounder captures noise rather than true confounding.";
inline constexpr const char* kNoDeficiencySentence = "No deficiency detected.";

struct Diagnosis {
  std::vector<DiagnosisCode> codes; ///< in REDUNDANT, WEAK_ALIGNMENT, NOISE order
  std::string text;                 ///< one sentence per code, newline separated
};

/// REDUNDANT: gain below redundancy_threshold (or within one seed-spread of
/// zero). WEAK_ALIGNMENT: rho_max below weak_alignment_threshold. NOISE:
/// positive gain with weak alignment.
Diagnosis diagnose(const validation::SignalSummary& signal, const FeedbackConfig& config);

struct Hints {
  std::vector<std::string> redundant_covariates;
  std::vector<std::string> suggested_domains;
};

/// Covariates whose |Spearman| with latent dimension `best_dim` exceeds
/// hint_correlation_threshold are reported as redundant directions. The
/// covariates in the bottom hint_bottom_fraction (rounded up) by their
/// strongest |Spearman| with any latent dimension become suggested domains,
/// phrased "factors related to <name>".
Hints derive_hints(const cevae::LatentPosterior& posterior, const nn::Matrix& covariates,
                   std::span<const std::string> column_names, std::size_t best_dim, const FeedbackConfig& config);

class RenderError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

struct FeedbackInputs {
  std::size_t round = 0;
  std::optional<std::string> confounder_name;
  std::optional<validation::SignalSummary> signal;
  std::optional<Diagnosis> diagnosis;
  Hints hints;
};

struct FeedbackMessage {
  std::size_t round = 0;
  std::string rendered_text;
  std::vector<DiagnosisCode> diagnosis_codes;
  std::vector<std::string> exclusion_list;
  std::vector<std::string> suggested_domains;
  std::vector<std::string> redundant_covariates;
};

void to_json(nlohmann::ordered_json& j, const FeedbackMessage& m);

/// "p<1e-N" below 1e-4 (N chosen so the bound holds), otherwise "p=0.xxxx".
std::string format_p_value(double p);

/// Fills the validation-feedback template. `history_names` lists every
/// confounder proposed so far, including the round being reported; each
/// distinct name appears once in the exclusion list, in first-seen order.
/// Throws RenderError naming every missing field.
FeedbackMessage render(const FeedbackInputs& inputs, std::span<const std::string> history_names);

} // namespace vigor::feedback
