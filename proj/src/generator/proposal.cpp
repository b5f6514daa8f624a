#include "vigor/generator/proposal.hpp"

#include "vigor/error.hpp"
#include "vigor/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace vigor::generator {

std::string to_string(DistributionKind kind) { return kind == DistributionKind::Normal ? "normal" : "bernoulli"; }

DistributionKind distribution_from_string(const std::string& text) {
  std::string lower;
  for (char c : text) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "normal" || lower == "gaussian") return DistributionKind::Normal;
  if (lower == "bernoulli" || lower == "binary") return DistributionKind::Bernoulli;
  throw ValidationError("unknown distribution kind '" + text + "'");
}

void DistributionSpec::validate() const {
  if (kind == DistributionKind::Normal) {
    if (mean.size() != std.size())
      throw ValidationError("normal distribution: " + std::to_string(mean.size()) + " means vs " +
                            std::to_string(std.size()) + " stds");
    for (std::size_t i = 0; i < mean.size(); ++i) {
      if (!std::isfinite(mean[i])) throw ValidationError("normal distribution: non-finite mean at row " + std::to_string(i));
      if (!(std[i] >= 0.0) || !std::isfinite(std[i]))
        throw ValidationError("normal distribution: invalid std at row " + std::to_string(i));
    }
  } else {
    for (std::size_t i = 0; i < p.size(); ++i)
      if (!(p[i] >= 0.0 && p[i] <= 1.0))
        throw ValidationError("bernoulli distribution: p outside [0, 1] at row " + std::to_string(i));
  }
}

DistributionSpec DistributionSpec::normal(std::vector<double> mean, std::vector<double> std) {
  DistributionSpec spec;
  spec.kind = DistributionKind::Normal;
  spec.mean = std::move(mean);
  spec.std = std::move(std);
  return spec;
}

DistributionSpec DistributionSpec::bernoulli(std::vector<double> p) {
  DistributionSpec spec;
  spec.kind = DistributionKind::Bernoulli;
  spec.p = std::move(p);
  return spec;
}

std::vector<double> sample_values(const DistributionSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<double> out(spec.size());
  if (spec.kind == DistributionKind::Normal) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double draw = rng.normal();
      out[i] = spec.std[i] == 0.0 ? spec.mean[i] : spec.mean[i] + spec.std[i] * draw;
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = rng.uniform() < spec.p[i] ? 1.0 : 0.0;
  }
  return out;
}

std::string extract_json_block(const std::string& raw) {
  const auto start = raw.find('{');
  if (start == std::string::npos) throw FormatError("no JSON object in model output", raw);
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (escaped)
        escaped = false;
      else if (c == '\\')
        escaped = true;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"')
      in_string = true;
    else if (c == '{')
      ++depth;
    else if (c == '}' && --depth == 0)
      return raw.substr(start, i - start + 1);
  }
  throw FormatError("unterminated JSON object in model output", raw);
}

PartialProposal parse_llm_response(const std::string& raw) {
  if (raw.empty()) throw FormatError("empty model output", raw);
  const std::string block = extract_json_block(raw);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(block);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed JSON in model output: ") + e.what(), raw);
  }
  PartialProposal out;
  auto text_field = [&](const char* key, bool required) -> std::string {
    if (!j.contains(key)) {
      if (required) throw FormatError(std::string("model output lacks \"") + key + "\"", raw);
      return {};
    }
    if (!j[key].is_string()) throw FormatError(std::string("\"") + key + "\" is not a string", raw);
    return j[key].get<std::string>();
  };
  out.name = text_field("name", true);
  out.explanation = text_field("explanation", true);
  out.parameter_logic = text_field("parameter_logic", false);
  if (out.name.find_first_not_of(" \t\r\n") == std::string::npos) throw FormatError("empty confounder name", raw);

  if (j.contains("distribution")) {
    const auto& d = j["distribution"];
    std::string kind;
    if (d.is_string())
      kind = d.get<std::string>();
    else if (d.is_object() && d.contains("kind") && d["kind"].is_string())
      kind = d["kind"].get<std::string>();
    else
      throw FormatError("\"distribution\" has an unexpected shape", raw);
    try {
      out.kind = distribution_from_string(kind);
    } catch (const ValidationError& e) {
      throw FormatError(e.what(), raw);
    }
  }
  return out;
}

ObservedData observe(const data::Dataset& dataset, std::string description) {
  dataset.validate();
  return ObservedData{dataset.column_names, dataset.x, dataset.t, dataset.y, std::move(description)};
}

void GeneratorRequest::validate() const {
  if (round < 1) throw ValidationError("generator request: round must be >= 1");
  if (data == nullptr) throw ValidationError("generator request: no data attached");
}

void to_json(nlohmann::ordered_json& j, const ConfounderProposal& p) {
  j = nlohmann::ordered_json{{"name", p.name},
                             {"explanation", p.explanation},
                             {"parameter_logic", p.parameter_logic},
                             {"distribution", to_string(p.distribution.kind)},
                             {"values", p.values}};
}

} // namespace vigor::generator
