#include "vigor/generator/generator.hpp"

#include "vigor/error.hpp"
#include "vigor/generator/llm_client.hpp"
#include "vigor/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace vigor::generator {

namespace {

std::string trim_lower(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out;
  for (char c : s.substr(b, e - b + 1)) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw GeneratorError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Scalar broadcast to n rows, an explicit array of length n, or a copy of an
// observed covariate ("column:<name>").
std::vector<double> expand(const nlohmann::json& value, const ObservedData& data, const std::string& field,
                           std::size_t round) {
  const std::size_t n = data.size();
  const std::string where = "script entry " + std::to_string(round) + ", field \"" + field + "\"";
  if (value.is_number()) return std::vector<double>(n, value.get<double>());
  if (value.is_array()) {
    auto out = value.get<std::vector<double>>();
    if (out.size() != n)
      throw GeneratorError(where + ": " + std::to_string(out.size()) + " values for " + std::to_string(n) + " rows");
    return out;
  }
  if (value.is_string()) {
    const auto text = value.get<std::string>();
    if (text.rfind("column:", 0) == 0) {
      const auto name = text.substr(7);
      const auto it = std::find(data.column_names.begin(), data.column_names.end(), name);
      if (it == data.column_names.end()) throw GeneratorError(where + ": no covariate named '" + name + "'");
      return data.x.column_copy(static_cast<std::size_t>(it - data.column_names.begin()));
    }
  }
  throw GeneratorError(where + ": expected a number, an array or \"column:<name>\"");
}

DistributionSpec load_params_file(const std::filesystem::path& path, DistributionKind kind, std::size_t n) {
  // A params file shares the dataset CSV grammar only loosely, so parse it here.
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw GeneratorError(path.string() + ": empty params file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(trim_lower(cell));
  }
  auto index_of = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::vector<double>> cols(header.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c >= header.size()) throw GeneratorError(path.string() + ":" + std::to_string(line_no) + ": too many fields");
      try {
        cols[c].push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw GeneratorError(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
      ++c;
    }
    if (c != header.size()) throw GeneratorError(path.string() + ":" + std::to_string(line_no) + ": too few fields");
  }
  auto column = [&](const std::string& name) {
    const auto idx = index_of(name);
    if (!idx) throw GeneratorError(path.string() + ": missing column '" + name + "'");
    if (cols[*idx].size() != n)
      throw GeneratorError(path.string() + ": " + std::to_string(cols[*idx].size()) + " rows for " +
                           std::to_string(n) + " individuals");
    return cols[*idx];
  };
  if (kind == DistributionKind::Bernoulli) return DistributionSpec::bernoulli(column("p"));
  auto mean = column("mean");
  std::vector<double> std_dev = index_of("std") ? column("std") : std::vector<double>(n, 0.0);
  return DistributionSpec::normal(std::move(mean), std::move(std_dev));
}

} // namespace

std::string to_string(Backend backend) {
  switch (backend) {
  case Backend::LlmHttp:
    return "llm_http";
  case Backend::Scripted:
    return "scripted";
  case Backend::Oracle:
    return "oracle";
  }
  return "unknown";
}

Backend backend_from_string(const std::string& text) {
  if (text == "llm_http") return Backend::LlmHttp;
  if (text == "scripted") return Backend::Scripted;
  if (text == "oracle") return Backend::Oracle;
  throw ValidationError("unknown generator backend '" + text + "' (expected llm_http, scripted or oracle)");
}

void GeneratorConfig::validate() const {
  if (!(temperature >= 0.0)) throw ValidationError("generator config: temperature must be >= 0");
  if (!(timeout_seconds > 0.0)) throw ValidationError("generator config: timeout_seconds must be > 0");
  if (!(retry_backoff_seconds >= 0.0)) throw ValidationError("generator config: retry_backoff_seconds must be >= 0");
  if (chunk_rows == 0) throw ValidationError("generator config: chunk_rows must be >= 1");
  if (max_concurrency == 0) throw ValidationError("generator config: max_concurrency must be >= 1");
  if (backend == Backend::Oracle) {
    if (oracle_noise.empty()) throw ValidationError("generator config: oracle_noise must not be empty");
    for (double s : oracle_noise)
      if (!(s >= 0.0)) throw ValidationError("generator config: oracle noise levels must be >= 0");
  }
  if (backend == Backend::LlmHttp && api_key_env.empty() && replay_dir.empty())
    throw ValidationError("generator config: llm_http needs api_key_env");
}

void to_json(nlohmann::ordered_json& j, const GeneratorConfig& c) {
  j = nlohmann::ordered_json{{"backend", to_string(c.backend)},
                             {"endpoint", c.endpoint},
                             {"model", c.model},
                             {"api_key_env", c.api_key_env},
                             {"temperature", c.temperature},
                             {"timeout_seconds", c.timeout_seconds},
                             {"max_retries", c.max_retries},
                             {"retry_backoff_seconds", c.retry_backoff_seconds},
                             {"max_reprompts", c.max_reprompts},
                             {"chunk_rows", c.chunk_rows},
                             {"max_concurrency", c.max_concurrency},
                             {"share_treatment_outcome", c.share_treatment_outcome},
                             {"capture_dir", c.capture_dir},
                             {"replay_dir", c.replay_dir},
                             {"script_path", c.script_path},
                             {"oracle_noise", c.oracle_noise}};
}

void from_json(const nlohmann::ordered_json& j, GeneratorConfig& c) {
  static const char* known[] = {"backend",         "endpoint",       "model",          "api_key_env",
                                "temperature",     "timeout_seconds", "max_retries",   "retry_backoff_seconds",
                                "max_reprompts",   "chunk_rows",     "max_concurrency", "share_treatment_outcome",
                                "capture_dir",     "replay_dir",     "script_path",    "oracle_noise"};
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      throw ValidationError("generator config: unknown key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  if (j.contains("backend")) c.backend = backend_from_string(j.at("backend").get<std::string>());
  get("endpoint", c.endpoint);
  get("model", c.model);
  get("api_key_env", c.api_key_env);
  get("temperature", c.temperature);
  get("timeout_seconds", c.timeout_seconds);
  get("max_retries", c.max_retries);
  get("retry_backoff_seconds", c.retry_backoff_seconds);
  get("max_reprompts", c.max_reprompts);
  get("chunk_rows", c.chunk_rows);
  get("max_concurrency", c.max_concurrency);
  get("share_treatment_outcome", c.share_treatment_outcome);
  get("capture_dir", c.capture_dir);
  get("replay_dir", c.replay_dir);
  get("script_path", c.script_path);
  get("oracle_noise", c.oracle_noise);
}

bool same_name(const std::string& a, const std::string& b) { return trim_lower(a) == trim_lower(b); }

ConfounderProposal generate_checked(Generator& generator, const GeneratorRequest& request) {
  request.validate();
  for (const auto& name : request.exclusion_list)
    if (name.empty()) throw ValidationError("generator request: empty name in exclusion list");
  ConfounderProposal proposal = generator.generate(request);
  for (const auto& name : request.exclusion_list)
    if (same_name(proposal.name, name))
      throw RejectionError("round " + std::to_string(request.round) + ": proposal '" + proposal.name +
                           "' repeats an earlier confounder");
  if (proposal.values.size() != request.data->size())
    throw GeneratorError("round " + std::to_string(request.round) + ": proposal has " +
                         std::to_string(proposal.values.size()) + " values for " +
                         std::to_string(request.data->size()) + " rows");
  for (std::size_t i = 0; i < proposal.values.size(); ++i)
    if (!std::isfinite(proposal.values[i]))
      throw GeneratorError("round " + std::to_string(request.round) + ": non-finite value at row " + std::to_string(i));
  return proposal;
}

// --- scripted -------------------------------------------------------------

ScriptedGenerator::ScriptedGenerator(nlohmann::json script, std::filesystem::path base_dir)
    : base_dir_(std::move(base_dir)) {
  if (!script.is_object() || !script.contains("proposals") || !script["proposals"].is_array())
    throw ValidationError("script: expected an object with a \"proposals\" array");
  for (auto& entry : script["proposals"]) {
    if (!entry.is_object()) throw ValidationError("script: every proposal must be an object");
    if (!entry.contains("error") && !entry.contains("name"))
      throw ValidationError("script: proposal " + std::to_string(entries_.size() + 1) + " has no name");
    entries_.push_back(entry);
  }
}

ScriptedGenerator ScriptedGenerator::from_file(const std::filesystem::path& path) {
  nlohmann::json script;
  try {
    script = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return ScriptedGenerator(std::move(script), path.parent_path());
}

ConfounderProposal ScriptedGenerator::generate(const GeneratorRequest& request) {
  request.validate();
  if (request.round > entries_.size())
    throw GeneratorError("script has " + std::to_string(entries_.size()) + " proposals; round " +
                         std::to_string(request.round) + " requested");
  const auto& entry = entries_[request.round - 1];
  if (entry.contains("error")) {
    const auto kind = entry["error"].get<std::string>();
    const auto message = entry.value("message", "scripted " + kind + " failure");
    if (kind == "transport") throw TransportError(message);
    if (kind == "format") throw FormatError(message, entry.value("raw", std::string{}));
    throw GeneratorError(message);
  }

  ConfounderProposal proposal;
  proposal.name = entry.at("name").get<std::string>();
  proposal.explanation = entry.value("explanation", std::string{});
  proposal.parameter_logic = entry.value("parameter_logic", std::string{});
  const auto kind = distribution_from_string(entry.value("distribution", std::string("normal")));
  const std::size_t n = request.data->size();

  if (entry.contains("params_file")) {
    std::filesystem::path file = entry["params_file"].get<std::string>();
    if (file.is_relative()) file = base_dir_ / file;
    proposal.distribution = load_params_file(file, kind, n);
  } else if (kind == DistributionKind::Normal) {
    proposal.distribution =
        DistributionSpec::normal(expand(entry.value("mean", nlohmann::json(0.0)), *request.data, "mean", request.round),
                                 expand(entry.value("std", nlohmann::json(1.0)), *request.data, "std", request.round));
  } else {
    proposal.distribution = DistributionSpec::bernoulli(expand(entry.at("p"), *request.data, "p", request.round));
  }
  proposal.values = sample_values(proposal.distribution, request.sample_seed);
  return proposal;
}

// --- oracle ---------------------------------------------------------------

OracleGenerator::OracleGenerator(std::vector<double> u_star, std::vector<double> noise_schedule)
    : u_star_(std::move(u_star)), noise_(std::move(noise_schedule)) {
  if (u_star_.empty()) throw ValidationError("oracle generator: planted confounder is empty");
  if (noise_.empty()) throw ValidationError("oracle generator: empty noise schedule");
  for (double s : noise_)
    if (!(s >= 0.0)) throw ValidationError("oracle generator: noise levels must be >= 0");
}

double OracleGenerator::noise_for_round(std::size_t round) const {
  return noise_[std::min(round, noise_.size()) - 1];
}

ConfounderProposal OracleGenerator::generate(const GeneratorRequest& request) {
  request.validate();
  if (request.data->size() != u_star_.size())
    throw ShapeError("oracle generator: " + std::to_string(u_star_.size()) + " planted values for " +
                     std::to_string(request.data->size()) + " rows");
  const double sigma = noise_for_round(request.round);
  ConfounderProposal proposal;
  char label[64];
  std::snprintf(label, sizeof label, "Oracle Confounder (round %zu, noise %.3g)", request.round, sigma);
  proposal.name = label;
  proposal.explanation = "planted confounder observed through Gaussian noise";
  proposal.parameter_logic = "mean = planted value, std = round noise level";
  proposal.distribution = DistributionSpec::normal(u_star_, std::vector<double>(u_star_.size(), sigma));
  proposal.values = sample_values(proposal.distribution, request.sample_seed);
  return proposal;
}

std::unique_ptr<Generator> make_generator(const GeneratorConfig& config, std::optional<std::vector<double>> u_star,
                                          const std::filesystem::path& base_dir) {
  config.validate();
  switch (config.backend) {
  case Backend::Scripted: {
    if (config.script_path.empty()) throw ValidationError("generator config: scripted backend needs script_path");
    std::filesystem::path path = config.script_path;
    if (path.is_relative() && !base_dir.empty()) path = base_dir / path;
    return std::make_unique<ScriptedGenerator>(ScriptedGenerator::from_file(path));
  }
  case Backend::Oracle:
    if (!u_star) throw ValidationError("oracle backend needs the planted confounder (ground-truth sidecar)");
    return std::make_unique<OracleGenerator>(std::move(*u_star), config.oracle_noise);
  case Backend::LlmHttp:
    return std::make_unique<LlmGenerator>(config, make_transport(config));
  }
  throw ValidationError("unknown generator backend");
}

} // namespace vigor::generator
