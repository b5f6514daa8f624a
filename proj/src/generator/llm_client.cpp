#include "vigor/generator/llm_client.hpp"

#include "vigor/error.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

namespace vigor::generator {

namespace {

std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? ", " : "") + names[i];
  return out;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

bool retryable_status(int status) { return status == 429 || status >= 500; }

} // namespace

// --- transports -------------------------------------------------------------

HttpTransport::HttpTransport(HttpOptions options) : options_(std::move(options)) {
  const auto scheme_end = options_.endpoint.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint must start with http:// or https://");
  const auto path_start = options_.endpoint.find('/', scheme_end + 3);
  origin_ = options_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : options_.endpoint.substr(path_start);
}

std::string HttpTransport::post(const nlohmann::ordered_json& body, const std::string& tag) {
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration<double>(options_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);

  const std::string payload = body.dump();
  std::string last_error;
  double backoff = options_.retry_backoff_seconds;
  for (std::size_t attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0 && backoff > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
      backoff *= 2.0;
    }
    auto result = client.Post(path_, headers, payload, "application/json");
    if (!result) {
      last_error = "network error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status >= 200 && result->status < 300) return result->body;
    last_error = "HTTP " + std::to_string(result->status);
    if (!retryable_status(result->status)) break;
  }
  throw TransportError(tag + ": " + last_error + " after " + std::to_string(options_.max_retries) + " retries");
}

RecordingTransport::RecordingTransport(std::unique_ptr<ChatTransport> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
}

std::string RecordingTransport::post(const nlohmann::ordered_json& body, const std::string& tag) {
  std::string response = inner_->post(body, tag);
  std::lock_guard lock(mutex_);
  std::ofstream(dir_ / (tag + ".request.json"), std::ios::binary) << body.dump(2) << '\n';
  std::ofstream(dir_ / (tag + ".response.json"), std::ios::binary) << response;
  return response;
}

ReplayTransport::ReplayTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

std::string ReplayTransport::post(const nlohmann::ordered_json&, const std::string& tag) {
  const auto path = dir_ / (tag + ".response.json");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TransportError("replay: no recorded response " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string chat_content(const std::string& response_body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(response_body);
  } catch (const nlohmann::json::parse_error&) {
    throw FormatError("response body is not JSON", response_body);
  }
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
    throw FormatError("response has no choices", response_body);
  const auto& message = j["choices"][0].value("message", nlohmann::json::object());
  if (!message.contains("content") || !message["content"].is_string())
    throw FormatError("response choice has no text content", response_body);
  return message["content"].get<std::string>();
}

std::unique_ptr<ChatTransport> make_transport(const GeneratorConfig& config) {
  if (!config.replay_dir.empty()) return std::make_unique<ReplayTransport>(config.replay_dir);
  HttpOptions options;
  options.endpoint = config.endpoint;
  options.timeout_seconds = config.timeout_seconds;
  options.max_retries = config.max_retries;
  options.retry_backoff_seconds = config.retry_backoff_seconds;
  if (const char* key = std::getenv(config.api_key_env.c_str())) options.api_key = key;
  if (options.api_key.empty())
    throw ValidationError("environment variable " + config.api_key_env + " is not set (API key for llm_http)");
  std::unique_ptr<ChatTransport> transport = std::make_unique<HttpTransport>(std::move(options));
  if (!config.capture_dir.empty())
    transport = std::make_unique<RecordingTransport>(std::move(transport), config.capture_dir);
  return transport;
}

// --- prompts ----------------------------------------------------------------

namespace prompts {

std::string system(const ObservedData& data) {
  std::ostringstream s;
  s << "You help with causal inference on an observational dataset of " << data.size() << " individuals.\n"
    << "Treatment: t (binary). Outcome: y (binary).\n"
    << "Observed covariates: " << join_names(data.column_names) << ".\n";
  if (!data.description.empty()) s << "Variable semantics:\n" << data.description << "\n";
  s << "Some confounding of the t-y relationship is not captured by the observed covariates.\n"
    << "Always answer with a single JSON object and nothing else.";
  return s.str();
}

std::string variable(const GeneratorRequest& request) {
  std::ostringstream s;
  s << "Propose one unobserved variable that plausibly influences both the treatment and the outcome "
    << "and is not one of the observed covariates.\n";
  if (request.round > 1 && !request.feedback.empty()) s << "\nFeedback on earlier attempts:\n" << request.feedback << "\n\n";
  if (!request.exclusion_list.empty())
    s << "Do not propose any of these (or close variants): " << join_names(request.exclusion_list) << ".\n";
  s << "Respond with JSON: {\"name\": <short variable name>, \"explanation\": <causal explanation linking it to "
       "treatment and outcome>}";
  return s.str();
}

std::string distribution(const PartialProposal& proposal) {
  std::ostringstream s;
  s << "Confounder: " << proposal.name << "\nExplanation: " << proposal.explanation << "\n"
    << "Choose the distribution family for this variable at the individual level: \"normal\" for a continuous "
       "quantity or \"bernoulli\" for a binary one, and describe how its parameters should depend on an "
       "individual's data.\n"
    << "Respond with JSON: {\"name\": \"" << proposal.name
    << "\", \"explanation\": <repeat>, \"distribution\": \"normal\" | \"bernoulli\", \"parameter_logic\": <text>}";
  return s.str();
}

std::string parameters(const PartialProposal& proposal, DistributionKind kind, const ObservedData& data,
                       std::size_t begin, std::size_t end, bool share_treatment_outcome) {
  std::ostringstream s;
  s << "Confounder: " << proposal.name << " (" << to_string(kind) << ")\n";
  if (!proposal.parameter_logic.empty()) s << "Parameter logic: " << proposal.parameter_logic << "\n";
  s << "For every row below infer the individual's distribution parameters.\n"
    << "Rows (row," << join_names(data.column_names);
  if (share_treatment_outcome) s << ",t,y";
  s << "):\n";
  for (std::size_t i = begin; i < end; ++i) {
    s << i;
    for (std::size_t c = 0; c < data.x.cols(); ++c) s << ',' << short_number(data.x(i, c));
    if (share_treatment_outcome) s << ',' << data.t[i] << ',' << data.y[i];
    s << '\n';
  }
  if (kind == DistributionKind::Normal)
    s << "Respond with JSON: {\"params\": [{\"row\": <row>, \"mean\": <number>, \"std\": <positive number>}, ...]} "
         "with one entry per row.";
  else
    s << "Respond with JSON: {\"params\": [{\"row\": <row>, \"p\": <probability>}, ...]} with one entry per row.";
  return s.str();
}

std::string format_reminder(const std::string& problem) {
  return "Your previous answer could not be used (" + problem +
         "). Reply again with exactly one JSON object in the requested format and no other text.";
}

} // namespace prompts

void parse_parameter_chunk(const std::string& raw, DistributionKind kind, std::size_t begin, std::size_t end,
                           DistributionSpec& into) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(extract_json_block(raw));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed parameter JSON: ") + e.what(), raw);
  }
  if (!j.contains("params") || !j["params"].is_array()) throw FormatError("no \"params\" array", raw);
  std::vector<bool> seen(end - begin, false);
  for (const auto& item : j["params"]) {
    if (!item.is_object() || !item.contains("row") || !item["row"].is_number_integer())
      throw FormatError("parameter entry without an integer row", raw);
    const auto row = item["row"].get<long long>();
    if (row < static_cast<long long>(begin) || row >= static_cast<long long>(end))
      throw FormatError("row " + std::to_string(row) + " outside this chunk", raw);
    const auto r = static_cast<std::size_t>(row);
    if (seen[r - begin]) throw FormatError("row " + std::to_string(row) + " repeated", raw);
    seen[r - begin] = true;
    auto number = [&](const char* key) {
      if (!item.contains(key) || !item[key].is_number())
        throw FormatError("row " + std::to_string(row) + " lacks numeric \"" + key + "\"", raw);
      return item[key].get<double>();
    };
    if (kind == DistributionKind::Normal) {
      const double mean = number("mean");
      const double sd = number("std");
      if (!std::isfinite(mean) || !(sd >= 0.0)) throw FormatError("row " + std::to_string(row) + ": invalid mean/std", raw);
      into.mean[r] = mean;
      into.std[r] = sd;
    } else {
      const double p = number("p");
      if (!(p >= 0.0 && p <= 1.0)) throw FormatError("row " + std::to_string(row) + ": p outside [0, 1]", raw);
      into.p[r] = p;
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i]) throw FormatError("row " + std::to_string(begin + i) + " missing", raw);
}

// --- generator --------------------------------------------------------------

LlmGenerator::LlmGenerator(GeneratorConfig config, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (!transport_) throw ValidationError("llm generator: no transport");
}

std::string LlmGenerator::ask(const std::string& system_prompt, const std::string& user_prompt, const std::string& tag,
                              std::size_t attempt, const std::string& reminder) {
  nlohmann::ordered_json messages = nlohmann::ordered_json::array();
  messages.push_back({{"role", "system"}, {"content", system_prompt}});
  messages.push_back({{"role", "user"}, {"content", user_prompt}});
  if (!reminder.empty()) messages.push_back({{"role", "user"}, {"content", reminder}});
  nlohmann::ordered_json body{{"model", config_.model},
                              {"messages", messages},
                              {"temperature", config_.temperature},
                              {"metadata", {{"prompt_version", prompts::kVersion}}}};
  return chat_content(transport_->post(body, tag + "_a" + std::to_string(attempt)));
}

template <typename Parse>
auto LlmGenerator::ask_until_parsed(const std::string& system_prompt, const std::string& user_prompt,
                                    const std::string& tag, Parse parse) {
  std::string reminder;
  for (std::size_t attempt = 0;; ++attempt) {
    std::string content;
    try {
      content = ask(system_prompt, user_prompt, tag, attempt, reminder);
      return parse(content);
    } catch (const FormatError& e) {
      if (attempt >= config_.max_reprompts)
        throw FormatError(tag + ": unusable model output after " + std::to_string(config_.max_reprompts) +
                              " re-prompts: " + e.what(),
                          e.raw());
      reminder = prompts::format_reminder(e.what());
    }
  }
}

ConfounderProposal LlmGenerator::generate(const GeneratorRequest& request) {
  request.validate();
  const ObservedData& data = *request.data;
  const std::string system_prompt = prompts::system(data);
  const std::string round_tag = "r" + std::to_string(request.round);

  PartialProposal partial = ask_until_parsed(system_prompt, prompts::variable(request), round_tag + "_var",
                                             [](const std::string& raw) { return parse_llm_response(raw); });
  const PartialProposal dist =
      ask_until_parsed(system_prompt, prompts::distribution(partial), round_tag + "_dist", [](const std::string& raw) {
        auto parsed = parse_llm_response(raw);
        if (!parsed.kind) throw FormatError("no distribution kind", raw);
        return parsed;
      });
  const DistributionKind kind = *dist.kind;
  partial.kind = kind;
  partial.parameter_logic = dist.parameter_logic;

  const std::size_t n = data.size();
  DistributionSpec spec = kind == DistributionKind::Normal
                              ? DistributionSpec::normal(std::vector<double>(n), std::vector<double>(n))
                              : DistributionSpec::bernoulli(std::vector<double>(n));
  const std::size_t chunks = (n + config_.chunk_rows - 1) / config_.chunk_rows;

  auto run_chunk = [&](std::size_t c) {
    const std::size_t begin = c * config_.chunk_rows;
    const std::size_t end = std::min(n, begin + config_.chunk_rows);
    const auto prompt = prompts::parameters(partial, kind, data, begin, end, config_.share_treatment_outcome);
    // each chunk writes a disjoint row range of spec
    ask_until_parsed(system_prompt, prompt, round_tag + "_param_c" + std::to_string(c), [&](const std::string& raw) {
      parse_parameter_chunk(raw, kind, begin, end, spec);
      return true;
    });
  };
  for (std::size_t wave = 0; wave < chunks; wave += config_.max_concurrency) {
    const std::size_t stop = std::min(chunks, wave + config_.max_concurrency);
    if (stop - wave == 1) {
      run_chunk(wave);
      continue;
    }
    std::vector<std::future<void>> pending;
    for (std::size_t c = wave; c < stop; ++c) pending.push_back(std::async(std::launch::async, run_chunk, c));
    for (auto& f : pending) f.get();
  }

  ConfounderProposal proposal;
  proposal.name = partial.name;
  proposal.explanation = partial.explanation;
  proposal.parameter_logic = partial.parameter_logic;
  proposal.distribution = std::move(spec);
  proposal.values = sample_values(proposal.distribution, request.sample_seed);
  return proposal;
}

} // namespace vigor::generator
