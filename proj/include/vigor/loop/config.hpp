#pragma once

#include "vigor/cevae/config.hpp"
#include "vigor/feedback/feedback.hpp"
#include "vigor/generator/generator.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace vigor::loop {

struct LoopConfig {
  double tau_elbo = 0.01;
  double tau_rho = 0.2;
  std::size_t k_max = 5;
  double epsilon = 0.001;
  std::size_t m = 2;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t mi_neighbors = 3;
  std::string data_description; ///< optional variable semantics passed to the generator

  cevae::CevaeConfig cevae;
  generator::GeneratorConfig generator;
  feedback::FeedbackConfig feedback;

  void validate() const;
};

void to_json(nlohmann::ordered_json& j, const LoopConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::ordered_json& j, LoopConfig& c);

} // namespace vigor::loop
