#include "vigor/cevae/config.hpp"

#include "vigor/error.hpp"

namespace vigor::cevae {

std::string to_string(UhatRouting routing) {
  return routing == UhatRouting::EncoderOnly ? "encoder_only" : "encoder_and_decoders";
}

UhatRouting routing_from_string(const std::string& text) {
  if (text == "encoder_only") return UhatRouting::EncoderOnly;
  if (text == "encoder_and_decoders") return UhatRouting::EncoderAndDecoders;
  throw ValidationError("unknown u_hat routing '" + text + "' (expected encoder_only or encoder_and_decoders)");
}

void CevaeConfig::validate() const {
  if (latent_dim < 1) throw ValidationError("cevae config: latent_dim must be >= 1");
  if (hidden_dim < 1) throw ValidationError("cevae config: hidden_dim must be >= 1");
  if (batch_size < 2) throw ValidationError("cevae config: batch_size must be >= 2 (batch normalisation)");
  if (!(kl_weight >= 0.0)) throw ValidationError("cevae config: kl_weight must be >= 0");
  if (!(learning_rate >= 0.0)) throw ValidationError("cevae config: learning_rate must be >= 0");
  if (eval_mc_samples < 1) throw ValidationError("cevae config: eval_mc_samples must be >= 1");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    throw ValidationError("cevae config: holdout_fraction must lie in [0, 1)");
  if (!(batch_norm.momentum > 0.0 && batch_norm.momentum < 1.0))
    throw ValidationError("cevae config: batch-norm momentum must lie in (0, 1)");
  if (!(batch_norm.epsilon > 0.0)) throw ValidationError("cevae config: batch-norm epsilon must be > 0");
}

void to_json(nlohmann::ordered_json& j, const CevaeConfig& c) {
  j = nlohmann::ordered_json{
      {"latent_dim", c.latent_dim},
      {"hidden_dim", c.hidden_dim},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"learning_rate", c.learning_rate},
      {"kl_weight", c.kl_weight},
      {"seed", c.seed},
      {"augmented", c.augmented},
      {"u_hat_routing", to_string(c.routing)},
      {"eval_mc_samples", c.eval_mc_samples},
      {"eval_seed", c.eval_seed},
      {"holdout_fraction", c.holdout_fraction},
      {"eval_every", c.eval_every},
      {"batch_norm_momentum", c.batch_norm.momentum},
      {"batch_norm_epsilon", c.batch_norm.epsilon},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_epsilon", c.adam_epsilon},
  };
}

void from_json(const nlohmann::ordered_json& j, CevaeConfig& c) {
  static const char* known[] = {"latent_dim", "hidden_dim", "batch_size", "epochs", "learning_rate", "kl_weight",
                                "seed", "augmented", "u_hat_routing", "eval_mc_samples", "eval_seed",
                                "holdout_fraction", "eval_every", "batch_norm_momentum", "batch_norm_epsilon",
                                "adam_beta1", "adam_beta2", "adam_epsilon"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError("cevae config: unknown key '" + key + "'");
  }
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  get("latent_dim", c.latent_dim);
  get("hidden_dim", c.hidden_dim);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("learning_rate", c.learning_rate);
  get("kl_weight", c.kl_weight);
  get("seed", c.seed);
  get("augmented", c.augmented);
  if (j.contains("u_hat_routing")) c.routing = routing_from_string(j.at("u_hat_routing").get<std::string>());
  get("eval_mc_samples", c.eval_mc_samples);
  get("eval_seed", c.eval_seed);
  get("holdout_fraction", c.holdout_fraction);
  get("eval_every", c.eval_every);
  get("batch_norm_momentum", c.batch_norm.momentum);
  get("batch_norm_epsilon", c.batch_norm.epsilon);
  get("adam_beta1", c.adam_beta1);
  get("adam_beta2", c.adam_beta2);
  get("adam_epsilon", c.adam_epsilon);
}

} // namespace vigor::cevae
