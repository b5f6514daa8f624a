#pragma once

#include "vigor/cevae/config.hpp"
#include "vigor/data/dataset.hpp"
#include "vigor/nn/adam.hpp"
#include "vigor/nn/layers.hpp"
#include "vigor/nn/matrix.hpp"
#include "vigor/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vigor::cevae {

/// Mean over rows of KL(N(mu, exp(log_var)) || N(0, I)), summed over dimensions.
double kl_diag_gaussian(const nn::Matrix& mu, const nn::Matrix& log_var);

/// Mean Bernoulli negative log-likelihood. Predictions are clamped to
/// [1e-7, 1 - 1e-7]; labels must be exactly 0 or 1.
double bce(std::span<const double> y_true, std::span<const double> y_pred);

/// Per-datapoint means; reconstruction terms are log-likelihoods.
struct ElboReport {
  double elbo = 0.0;
  double recon_t = 0.0;
  double recon_y = 0.0;
  double kl = 0.0;
  std::size_t mc_samples = 1;
  std::uint64_t seed = 0;
};

struct LatentPosterior {
  nn::Matrix mu;
  nn::Matrix log_var;
};

/// Scaling fitted once per dataset and stored with the model.
struct InputScaling {
  data::Standardizer x;
  double u_min = 0.0;
  double u_max = 0.0;

  static InputScaling fit(const data::Dataset& dataset);
  double scale_u(double value) const;
};

/// Network-ready inputs: standardised covariates, 0/1 columns, scaled U.
struct ModelInputs {
  nn::Matrix x;
  nn::Matrix t;
  nn::Matrix y;
  std::optional<nn::Matrix> u;

  std::size_t rows() const { return x.rows(); }
  ModelInputs select_rows(std::span<const std::size_t> rows) const;
};

/// Linear -> ReLU -> BatchNorm -> Linear -> ReLU, then mu and log-variance heads.
struct Encoder {
  nn::LinearLayer input;
  nn::ReluLayer relu1;
  nn::BatchNormLayer norm;
  nn::LinearLayer hidden;
  nn::ReluLayer relu2;
  nn::LinearLayer mu_head;
  nn::LinearLayer log_var_head;
};

/// Linear -> ReLU -> Linear -> ReLU -> Linear(1) -> Sigmoid.
struct BernoulliDecoder {
  nn::LinearLayer input;
  nn::ReluLayer relu1;
  nn::LinearLayer hidden;
  nn::ReluLayer relu2;
  nn::LinearLayer output;
  nn::SigmoidLayer sigmoid;

  nn::Matrix forward(const nn::Matrix& in);
  nn::Matrix backward(const nn::Matrix& grad_prob);
};

/// Causal effect VAE with a Gaussian latent, treatment decoder p(T|z,X) and
/// binary outcome decoder p(Y|z,X,T).
///
/// Column layouts: encoder [X, T, Y, (U)], treatment decoder [z, X, (U)],
/// outcome decoder [z, X, T, (U)]. The U column is appended only for
/// augmented models, and enters the decoders only with EncoderAndDecoders
/// routing. Weights that read U start at zero, so an augmented model starts
/// out computing exactly what the baseline with the same seed computes.
class CevaeModel {
public:
  CevaeModel(const CevaeConfig& config, std::size_t covariate_dim, InputScaling scaling);

  const CevaeConfig& config() const { return config_; }
  std::size_t covariate_dim() const { return covariate_dim_; }
  const InputScaling& scaling() const { return scaling_; }

  bool u_in_encoder() const { return config_.augmented; }
  bool u_in_decoders() const { return config_.augmented && config_.routing == UhatRouting::EncoderAndDecoders; }

  /// Applies the stored scaling. Augmented models require dataset.u_hat.
  ModelInputs prepare(const data::Dataset& dataset) const;

  /// Training-mode ELBO with the given reparameterisation noise (rows x latent).
  /// When accumulate_grads is set, gradients of -ELBO are added to the
  /// parameter gradient buffers.
  ElboReport elbo_with_noise(const ModelInputs& batch, const nn::Matrix& noise, bool accumulate_grads);

  /// One reparameterised sample per row, training mode, gradients accumulated.
  ElboReport train_step(const ModelInputs& batch, Rng& noise_rng);

  /// Eval-mode ELBO averaged over mc_samples latent draws from Rng(seed).
  ElboReport evaluate(const ModelInputs& inputs, std::size_t mc_samples, std::uint64_t seed);

  LatentPosterior posterior(const ModelInputs& inputs);

  /// Mean over rows and posterior draws of p(Y|z,X,T=1) - p(Y|z,X,T=0), with z
  /// drawn from q given the factual inputs.
  double estimate_ate(const ModelInputs& inputs, std::size_t mc_samples, std::uint64_t seed);

  std::vector<nn::ParamRef> parameters();
  void zero_grad();

  nn::AdamState& optimizer() { return optimizer_; }
  const nn::AdamState& optimizer() const { return optimizer_; }

  Encoder& encoder() { return encoder_; }
  BernoulliDecoder& treatment_decoder() { return treatment_decoder_; }
  BernoulliDecoder& outcome_decoder() { return outcome_decoder_; }
  const Encoder& encoder() const { return encoder_; }

  /// ReLU sign pattern of the most recent forward pass, for kink detection in
  /// finite-difference checks.
  std::vector<unsigned char> activation_pattern() const;

private:
  struct EncoderOutput {
    nn::Matrix mu;
    nn::Matrix log_var;
  };

  nn::Matrix encoder_input(const ModelInputs& inputs) const;
  nn::Matrix treatment_input(const nn::Matrix& z, const ModelInputs& inputs) const;
  nn::Matrix outcome_input(const nn::Matrix& z, const ModelInputs& inputs, const nn::Matrix& t) const;
  EncoderOutput encode(const ModelInputs& inputs, bool training);
  void encoder_backward(const nn::Matrix& grad_mu, const nn::Matrix& grad_log_var);

  CevaeConfig config_;
  std::size_t covariate_dim_;
  InputScaling scaling_;
  Encoder encoder_;
  BernoulliDecoder treatment_decoder_;
  BernoulliDecoder outcome_decoder_;
  nn::AdamState optimizer_;
};

} // namespace vigor::cevae
