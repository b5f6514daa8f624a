#pragma once

#include "vigor/generator/proposal.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vigor::generator {

enum class Backend { LlmHttp, Scripted, Oracle };

std::string to_string(Backend backend);
Backend backend_from_string(const std::string& text);

struct GeneratorConfig {
  Backend backend = Backend::Scripted;

  // llm_http
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string api_key_env = "VIGOR_API_KEY"; ///< name of the variable, never its value
  double temperature = 0.7;
  double timeout_seconds = 60.0;
  std::size_t max_retries = 3;
  double retry_backoff_seconds = 1.0;
  std::size_t max_reprompts = 3;
  std::size_t chunk_rows = 200;
  std::size_t max_concurrency = 1;
  bool share_treatment_outcome = true; ///< include t and y in parameter-inference rows
  std::string capture_dir;             ///< record request/response pairs here when set
  std::string replay_dir;              ///< answer from recorded responses instead of the network

  // scripted
  std::string script_path;

  // oracle: noise level per round; the last entry repeats
  std::vector<double> oracle_noise = {0.0};

  void validate() const;
};

void to_json(nlohmann::ordered_json& j, const GeneratorConfig& c);
void from_json(const nlohmann::ordered_json& j, GeneratorConfig& c);

class Generator {
public:
  virtual ~Generator() = default;
  virtual ConfounderProposal generate(const GeneratorRequest& request) = 0;
  virtual std::string backend_name() const = 0;
};

/// Case-insensitive, whitespace-trimmed name comparison.
bool same_name(const std::string& a, const std::string& b);

/// Calls the backend and enforces the proposal contract: values cover every
/// row, and the name is not in the exclusion list (RejectionError otherwise).
ConfounderProposal generate_checked(Generator& generator, const GeneratorRequest& request);

/// Replays an ordered proposal list; round k uses entry k.
///
/// Script schema (JSON):
///   {"proposals": [ {"name": ..., "explanation": ..., "distribution": "normal",
///                    "mean": <number | array | "column:<covariate>">, "std": <number | array>},
///                   {"name": ..., "distribution": "bernoulli", "p": <number | array>},
///                   {"name": ..., "distribution": "normal", "params_file": "rows.csv"},
///                   {"error": "transport" | "format", "message": ...} ]}
/// A params_file is a CSV with a header naming "mean"/"std" or "p" columns,
/// resolved relative to the script.
class ScriptedGenerator : public Generator {
public:
  ScriptedGenerator(nlohmann::json script, std::filesystem::path base_dir);
  static ScriptedGenerator from_file(const std::filesystem::path& path);

  ConfounderProposal generate(const GeneratorRequest& request) override;
  std::string backend_name() const override { return "scripted"; }

  std::size_t size() const { return entries_.size(); }

private:
  std::vector<nlohmann::json> entries_;
  std::filesystem::path base_dir_;
};

/// Synthetic oracle: values = U* + sigma_k * N(0, 1) for round k. The planted
/// column is handed over at construction and never travels in a request.
class OracleGenerator : public Generator {
public:
  OracleGenerator(std::vector<double> u_star, std::vector<double> noise_schedule);

  ConfounderProposal generate(const GeneratorRequest& request) override;
  std::string backend_name() const override { return "oracle"; }

  double noise_for_round(std::size_t round) const;

private:
  std::vector<double> u_star_;
  std::vector<double> noise_;
};

/// Builds the configured backend. `u_star` is required for the oracle only;
/// `base_dir` resolves relative script paths.
std::unique_ptr<Generator> make_generator(const GeneratorConfig& config,
                                          std::optional<std::vector<double>> u_star = std::nullopt,
                                          const std::filesystem::path& base_dir = {});

} // namespace vigor::generator
