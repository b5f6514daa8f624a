#pragma once

#include "vigor/nn/adam.hpp"
#include "vigor/nn/layers.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace vigor::cevae {

/// Which networks receive the candidate confounder column in an augmented model.
enum class UhatRouting {
  EncoderOnly,         ///< q(z | X, T, Y, U); decoders see X only
  EncoderAndDecoders,  ///< U is an extra covariate everywhere (augmented dataset)
};

std::string to_string(UhatRouting routing);
UhatRouting routing_from_string(const std::string& text);

struct CevaeConfig {
  std::size_t latent_dim = 5;
  std::size_t hidden_dim = 128;
  std::size_t batch_size = 256;
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  double kl_weight = 1.0;
  std::uint64_t seed = 0;
  bool augmented = false;
  UhatRouting routing = UhatRouting::EncoderAndDecoders;

  std::size_t eval_mc_samples = 10;
  std::uint64_t eval_seed = 20240611;
  double holdout_fraction = 0.2;
  std::size_t eval_every = 0; ///< held-out ELBO every N epochs in the trace (0 = final only)

  nn::BatchNormOptions batch_norm;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;

  /// Throws ValidationError when an invariant is violated.
  void validate() const;

  nn::AdamOptions adam_options() const { return {learning_rate, adam_beta1, adam_beta2, adam_epsilon}; }

  /// Width of the second hidden layer (encoder trunk and decoders).
  std::size_t second_hidden_dim() const { return hidden_dim / 2 > 0 ? hidden_dim / 2 : 1; }
};

void to_json(nlohmann::ordered_json& j, const CevaeConfig& c);
void from_json(const nlohmann::ordered_json& j, CevaeConfig& c);

} // namespace vigor::cevae
