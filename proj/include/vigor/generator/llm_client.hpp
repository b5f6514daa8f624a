#pragma once

#include "vigor/generator/generator.hpp"

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

namespace vigor::generator {

/// One chat-completion exchange. `tag` names the call (round, stage, chunk,
/// attempt) so captures and replays line up regardless of call order.
class ChatTransport {
public:
  virtual ~ChatTransport() = default;
  /// Returns the raw response body.
  virtual std::string post(const nlohmann::ordered_json& body, const std::string& tag) = 0;
};

struct HttpOptions {
  std::string endpoint;
  std::string api_key; ///< sent as a bearer token, never logged
  double timeout_seconds = 60.0;
  std::size_t max_retries = 3;
  double retry_backoff_seconds = 1.0; ///< doubled after every failed attempt
};

/// POSTs JSON to an OpenAI-style endpoint. 429 and 5xx responses and network
/// failures are retried; other 4xx statuses fail at once.
class HttpTransport : public ChatTransport {
public:
  explicit HttpTransport(HttpOptions options);
  std::string post(const nlohmann::ordered_json& body, const std::string& tag) override;

private:
  HttpOptions options_;
  std::string origin_; ///< scheme://host[:port]
  std::string path_;
};

/// Writes <tag>.request.json and <tag>.response.json next to each call.
class RecordingTransport : public ChatTransport {
public:
  RecordingTransport(std::unique_ptr<ChatTransport> inner, std::filesystem::path dir);
  std::string post(const nlohmann::ordered_json& body, const std::string& tag) override;

private:
  std::unique_ptr<ChatTransport> inner_;
  std::filesystem::path dir_;
  std::mutex mutex_;
};

/// Serves <tag>.response.json from a capture directory.
class ReplayTransport : public ChatTransport {
public:
  explicit ReplayTransport(std::filesystem::path dir);
  std::string post(const nlohmann::ordered_json& body, const std::string& tag) override;

private:
  std::filesystem::path dir_;
};

/// Extracts choices[0].message.content from a chat-completion body.
std::string chat_content(const std::string& response_body);

/// Prompt text for the three generation stages.
namespace prompts {
inline constexpr const char* kVersion = "vigor-prompts/1";

std::string system(const ObservedData& data);
std::string variable(const GeneratorRequest& request);
std::string distribution(const PartialProposal& proposal);
std::string parameters(const PartialProposal& proposal, DistributionKind kind, const ObservedData& data,
                       std::size_t begin, std::size_t end, bool share_treatment_outcome);
std::string format_reminder(const std::string& problem);
} // namespace prompts

/// Parses {"params": [{"row": i, "mean": m, "std": s} | {"row": i, "p": q}, ...]}
/// and requires every row in [begin, end) exactly once.
void parse_parameter_chunk(const std::string& raw, DistributionKind kind, std::size_t begin, std::size_t end,
                           DistributionSpec& into);

/// Three-stage generation against a chat-completion endpoint: confounder
/// name and explanation, distribution kind, then per-row parameters in
/// chunks. Malformed output is re-prompted up to max_reprompts times.
class LlmGenerator : public Generator {
public:
  LlmGenerator(GeneratorConfig config, std::unique_ptr<ChatTransport> transport);

  ConfounderProposal generate(const GeneratorRequest& request) override;
  std::string backend_name() const override { return "llm_http"; }

private:
  std::string ask(const std::string& system_prompt, const std::string& user_prompt, const std::string& tag,
                  std::size_t attempt, const std::string& reminder);

  template <typename Parse> auto ask_until_parsed(const std::string& system_prompt, const std::string& user_prompt,
                                                  const std::string& tag, Parse parse);

  GeneratorConfig config_;
  std::unique_ptr<ChatTransport> transport_;
};

/// Transport chain for the config: replay, or HTTP (optionally recorded).
/// Reads the API key from the environment variable named in the config.
std::unique_ptr<ChatTransport> make_transport(const GeneratorConfig& config);

} // namespace vigor::generator
