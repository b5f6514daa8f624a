#pragma once

#include "vigor/data/dataset.hpp"
#include "vigor/feedback/feedback.hpp"
#include "vigor/generator/generator.hpp"
#include "vigor/loop/config.hpp"
#include "vigor/loop/convergence.hpp"
#include "vigor/loop/validator.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace vigor::loop {

enum class RoundStatus { Success, Fail, Stopped };

std::string to_string(RoundStatus status);

/// One round of the loop. A round whose generator failed has `error` set and
/// no proposal, validation or feedback.
struct GenerationRecord {
  std::size_t round = 0;
  RoundStatus status = RoundStatus::Fail;
  Decision decision = Decision::Continue;
  std::optional<generator::ConfounderProposal> proposal;
  std::optional<RoundValidation> validation;
  std::optional<feedback::FeedbackMessage> feedback;
  std::string error_kind; ///< transport | format | rejection | generator
  std::string error;

  bool failed() const { return !validation.has_value(); }
};

struct AteRow {
  std::string method;
  double ate = 0.0;
};

struct RunLog {
  nlohmann::ordered_json config;
  std::string dataset_fingerprint;
  std::string generator_backend;
  std::vector<SeedBaseline> baselines;
  std::vector<GenerationRecord> records;
  Decision termination = Decision::Continue;
  std::optional<std::size_t> best_round; ///< highest mean delta among validated rounds
  std::vector<AteRow> ate_table;

  nlohmann::ordered_json to_json() const;

  /// Reads back the fields the report needs: names, signal summaries,
  /// statuses, feedback text and the ATE table. Per-seed detail and sampled
  /// values are not restored.
  static RunLog from_json(const nlohmann::ordered_json& j);
};

/// State carried between rounds.
struct LoopState {
  const generator::ObservedData* data = nullptr;
  generator::Generator* generator = nullptr;
  Validator* validator = nullptr;
  const LoopConfig* config = nullptr;
  std::vector<GenerationRecord> history;
};

/// Generates, validates and renders feedback for round k (= history size + 1),
/// then sets the record's decision and status and appends it.
const GenerationRecord& run_round(LoopState& state);

/// Runs rounds until a terminal decision and assembles the run log. The
/// dataset may carry ground truth; only its observed part reaches the generator.
RunLog run_loop(const data::Dataset& dataset, generator::Generator& generator, Validator& validator,
                const LoopConfig& config);

/// Round | Confounder | Delta ELBO | rho_max | Status
std::string render_round_table(const RunLog& log);
/// Method | ATE estimate
std::string render_ate_table(const RunLog& log);
/// Both tables plus termination summary and the last feedback message.
std::string render_report(const RunLog& log);

/// Exit code for the CLI: 0 success, 3 iteration budget, 4 diminishing returns.
int exit_code(Decision termination);

} // namespace vigor::loop
