#include "vigor/loop/config.hpp"

#include "vigor/error.hpp"

#include <algorithm>

namespace vigor::loop {

void LoopConfig::validate() const {
  if (!(tau_elbo > 0.0)) throw ValidationError("loop config: tau_elbo must be > 0");
  if (!(tau_rho > 0.0)) throw ValidationError("loop config: tau_rho must be > 0");
  if (!(epsilon > 0.0)) throw ValidationError("loop config: epsilon must be > 0");
  if (m < 1) throw ValidationError("loop config: m must be >= 1");
  if (k_max < 1) throw ValidationError("loop config: k_max must be >= 1");
  if (seeds.empty()) throw ValidationError("loop config: at least one seed is required");
  auto sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw ValidationError("loop config: duplicate seed");
  if (mi_neighbors < 1) throw ValidationError("loop config: mi_neighbors must be >= 1");
  cevae.validate();
  generator.validate();
  feedback.validate();
}

void to_json(nlohmann::ordered_json& j, const LoopConfig& c) {
  j = nlohmann::ordered_json{{"tau_elbo", c.tau_elbo},
                             {"tau_rho", c.tau_rho},
                             {"k_max", c.k_max},
                             {"epsilon", c.epsilon},
                             {"m", c.m},
                             {"seeds", c.seeds},
                             {"mi_neighbors", c.mi_neighbors},
                             {"data_description", c.data_description},
                             {"cevae", c.cevae},
                             {"generator", c.generator},
                             {"feedback", c.feedback}};
}

void from_json(const nlohmann::ordered_json& j, LoopConfig& c) {
  static const char* known[] = {"tau_elbo",     "tau_rho",          "k_max", "epsilon",   "m",       "seeds",
                                "mi_neighbors", "data_description", "cevae", "generator", "feedback"};
  for (const auto& [key, _] : j.items())
    if (std::none_of(std::begin(known), std::end(known), [&](const char* k) { return key == k; }))
      throw ValidationError("loop config: unknown key '" + key + "'");
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("tau_elbo", c.tau_elbo);
  get("tau_rho", c.tau_rho);
  get("k_max", c.k_max);
  get("epsilon", c.epsilon);
  get("m", c.m);
  get("seeds", c.seeds);
  get("mi_neighbors", c.mi_neighbors);
  get("data_description", c.data_description);
  if (j.contains("cevae")) cevae::from_json(j.at("cevae"), c.cevae);
  if (j.contains("generator")) generator::from_json(j.at("generator"), c.generator);
  if (j.contains("feedback")) feedback::from_json(j.at("feedback"), c.feedback);
}

} // namespace vigor::loop
