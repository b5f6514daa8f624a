#pragma once

#include "vigor/data/dataset.hpp"
#include "vigor/nn/matrix.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vigor::generator {

class GeneratorError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// HTTP failure that persisted through every retry.
class TransportError : public GeneratorError {
public:
  using GeneratorError::GeneratorError;
};

/// Model output could not be parsed. `raw()` keeps the offending text for logs.
class FormatError : public GeneratorError {
public:
  FormatError(const std::string& what, std::string raw) : GeneratorError(what), raw_(std::move(raw)) {}
  const std::string& raw() const { return raw_; }

private:
  std::string raw_;
};

/// The proposal reused a name from the exclusion list.
class RejectionError : public GeneratorError {
public:
  using GeneratorError::GeneratorError;
};

enum class DistributionKind { Normal, Bernoulli };

std::string to_string(DistributionKind kind);
DistributionKind distribution_from_string(const std::string& text);

/// Per-individual distribution parameters. Normal uses mean/std, Bernoulli uses p.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::Normal;
  std::vector<double> mean;
  std::vector<double> std;
  std::vector<double> p;

  std::size_t size() const { return kind == DistributionKind::Normal ? mean.size() : p.size(); }

  /// Throws ValidationError for length mismatches, negative stds or p outside [0, 1].
  void validate() const;

  static DistributionSpec normal(std::vector<double> mean, std::vector<double> std);
  static DistributionSpec bernoulli(std::vector<double> p);
};

/// Normal: mean + std * Box-Muller draw per row. Bernoulli: 1 when a uniform
/// draw falls below p. Row i consumes draws in row order from one stream.
std::vector<double> sample_values(const DistributionSpec& spec, std::uint64_t seed);

struct ConfounderProposal {
  std::string name;
  std::string explanation;
  std::string parameter_logic;
  DistributionSpec distribution;
  std::vector<double> values;
};

/// Name, explanation and distribution kind from the first stages of generation.
struct PartialProposal {
  std::string name;
  std::string explanation;
  std::optional<DistributionKind> kind;
  std::string parameter_logic;
};

/// Returns the outermost balanced {...} block in `raw`, skipping braces inside
/// JSON strings. Throws FormatError if none closes.
std::string extract_json_block(const std::string& raw);

/// Parses a response carrying {"name", "explanation", optional "distribution",
/// optional "parameter_logic"}; prose around the block is ignored.
PartialProposal parse_llm_response(const std::string& raw);

/// What a generator may see of the data: covariates, treatment and outcome.
/// Ground-truth columns never reach this type.
struct ObservedData {
  std::vector<std::string> column_names;
  nn::Matrix x;
  std::vector<double> t;
  std::vector<double> y;
  std::string description; ///< free-text semantics supplied by the user, may be empty

  std::size_t size() const { return t.size(); }
};

ObservedData observe(const data::Dataset& dataset, std::string description = {});

struct GeneratorRequest {
  const ObservedData* data = nullptr;
  std::size_t round = 1;
  std::string feedback;                    ///< empty in round 1
  std::vector<std::string> exclusion_list; ///< names proposed in earlier rounds
  std::uint64_t sample_seed = 0;

  void validate() const;
};

void to_json(nlohmann::ordered_json& j, const ConfounderProposal& p);

} // namespace vigor::generator
