#include "vigor/cevae/model.hpp"

#include "vigor/error.hpp"

#include <algorithm>
#include <cmath>

namespace vigor::cevae {

namespace {

double log_bernoulli(double label, double prob) {
  return label * std::log(prob) + (1.0 - label) * std::log(1.0 - prob);
}

nn::Matrix standard_normal(std::size_t rows, std::size_t cols, Rng& rng) {
  nn::Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

nn::Matrix constant_column(std::size_t rows, double value) { return nn::Matrix(rows, 1, value); }

} // namespace

double kl_diag_gaussian(const nn::Matrix& mu, const nn::Matrix& log_var) {
  if (mu.rows() != log_var.rows() || mu.cols() != log_var.cols())
    throw ShapeError("kl_diag_gaussian: mu " + mu.shape_string() + " vs log_var " + log_var.shape_string());
  if (mu.rows() == 0) return 0.0;
  double total = 0.0;
  const auto m = mu.data();
  const auto lv = log_var.data();
  for (std::size_t i = 0; i < m.size(); ++i) total += 0.5 * (std::exp(lv[i]) + m[i] * m[i] - 1.0 - lv[i]);
  return total / static_cast<double>(mu.rows());
}

double bce(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size())
    throw ShapeError("bce: " + std::to_string(y_true.size()) + " labels vs " + std::to_string(y_pred.size()) + " predictions");
  if (y_true.empty()) throw ValidationError("bce: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != 0.0 && y_true[i] != 1.0)
      throw ValidationError("bce: label at index " + std::to_string(i) + " is not 0 or 1");
    if (!(y_pred[i] >= 0.0 && y_pred[i] <= 1.0))
      throw ValidationError("bce: prediction at index " + std::to_string(i) + " is outside [0, 1]");
    const double p = std::clamp(y_pred[i], nn::kProbabilityClamp, 1.0 - nn::kProbabilityClamp);
    total -= log_bernoulli(y_true[i], p);
  }
  return total / static_cast<double>(y_true.size());
}

InputScaling InputScaling::fit(const data::Dataset& dataset) {
  InputScaling s;
  s.x = data::Standardizer::fit(dataset.x);
  if (dataset.u_hat && !dataset.u_hat->empty()) {
    const auto [lo, hi] = std::minmax_element(dataset.u_hat->begin(), dataset.u_hat->end());
    s.u_min = *lo;
    s.u_max = *hi;
  }
  return s;
}

double InputScaling::scale_u(double value) const {
  const double range = u_max - u_min;
  if (!(range > 0.0)) return 0.0;
  return (value - u_min) / range;
}

ModelInputs ModelInputs::select_rows(std::span<const std::size_t> rows) const {
  ModelInputs out{x.select_rows(rows), t.select_rows(rows), y.select_rows(rows), std::nullopt};
  if (u) out.u = u->select_rows(rows);
  return out;
}

nn::Matrix BernoulliDecoder::forward(const nn::Matrix& in) {
  nn::Matrix h = relu1.forward(input.forward(in));
  h = relu2.forward(hidden.forward(h));
  return sigmoid.forward(output.forward(h));
}

nn::Matrix BernoulliDecoder::backward(const nn::Matrix& grad_prob) {
  nn::Matrix g = output.backward(sigmoid.backward(grad_prob));
  g = hidden.backward(relu2.backward(g));
  return input.backward(relu1.backward(g));
}

CevaeModel::CevaeModel(const CevaeConfig& config, std::size_t covariate_dim, InputScaling scaling)
    : config_(config), covariate_dim_(covariate_dim), scaling_(std::move(scaling)), optimizer_(config.adam_options()) {
  config_.validate();
  if (scaling_.x.mean.size() != covariate_dim)
    throw ShapeError("cevae: scaling fitted on " + std::to_string(scaling_.x.mean.size()) + " covariates, model has " +
                     std::to_string(covariate_dim));
  const std::size_t d = covariate_dim;
  const std::size_t latent = config_.latent_dim;
  const std::size_t h1 = config_.hidden_dim;
  const std::size_t h2 = config_.second_hidden_dim();

  encoder_.input = nn::LinearLayer(d + 2, h1);
  encoder_.norm = nn::BatchNormLayer(h1, config_.batch_norm);
  encoder_.hidden = nn::LinearLayer(h1, h2);
  encoder_.mu_head = nn::LinearLayer(h2, latent);
  encoder_.log_var_head = nn::LinearLayer(h2, latent);

  treatment_decoder_.input = nn::LinearLayer(latent + d, h1);
  treatment_decoder_.hidden = nn::LinearLayer(h1, h2);
  treatment_decoder_.output = nn::LinearLayer(h2, 1);

  outcome_decoder_.input = nn::LinearLayer(latent + d + 1, h1);
  outcome_decoder_.hidden = nn::LinearLayer(h1, h2);
  outcome_decoder_.output = nn::LinearLayer(h2, 1);

  // Initialisation order is fixed so baseline and augmented models with the
  // same seed share every baseline-shaped weight.
  Rng rng(derive_seed(config_.seed, 101));
  for (nn::LinearLayer* layer : {&encoder_.input, &encoder_.hidden, &encoder_.mu_head, &encoder_.log_var_head,
                                 &treatment_decoder_.input, &treatment_decoder_.hidden, &treatment_decoder_.output,
                                 &outcome_decoder_.input, &outcome_decoder_.hidden, &outcome_decoder_.output})
    layer->init_glorot(rng);

  if (u_in_encoder()) encoder_.input.widen_input(1);
  if (u_in_decoders()) {
    treatment_decoder_.input.widen_input(1);
    outcome_decoder_.input.widen_input(1);
  }
}

ModelInputs CevaeModel::prepare(const data::Dataset& dataset) const {
  if (dataset.covariate_count() != covariate_dim_)
    throw ShapeError("cevae: dataset has " + std::to_string(dataset.covariate_count()) + " covariates, model expects " +
                     std::to_string(covariate_dim_));
  ModelInputs in{scaling_.x.apply(dataset.x), nn::Matrix::column(dataset.t), nn::Matrix::column(dataset.y), std::nullopt};
  if (config_.augmented) {
    if (!dataset.u_hat) throw ValidationError("cevae: augmented model requires a candidate confounder column");
    nn::Matrix u(dataset.size(), 1);
    for (std::size_t i = 0; i < dataset.size(); ++i) u(i, 0) = scaling_.scale_u((*dataset.u_hat)[i]);
    in.u = std::move(u);
  }
  return in;
}

nn::Matrix CevaeModel::encoder_input(const ModelInputs& in) const {
  if (u_in_encoder()) return nn::hconcat({&in.x, &in.t, &in.y, &*in.u});
  return nn::hconcat({&in.x, &in.t, &in.y});
}

nn::Matrix CevaeModel::treatment_input(const nn::Matrix& z, const ModelInputs& in) const {
  if (u_in_decoders()) return nn::hconcat({&z, &in.x, &*in.u});
  return nn::hconcat({&z, &in.x});
}

nn::Matrix CevaeModel::outcome_input(const nn::Matrix& z, const ModelInputs& in, const nn::Matrix& t) const {
  if (u_in_decoders()) return nn::hconcat({&z, &in.x, &t, &*in.u});
  return nn::hconcat({&z, &in.x, &t});
}

CevaeModel::EncoderOutput CevaeModel::encode(const ModelInputs& in, bool training) {
  if (config_.augmented && !in.u) throw ValidationError("cevae: augmented model requires the U column");
  nn::Matrix h = encoder_.relu1.forward(encoder_.input.forward(encoder_input(in)));
  h = encoder_.norm.forward(h, training);
  h = encoder_.relu2.forward(encoder_.hidden.forward(h));
  return {encoder_.mu_head.forward(h), encoder_.log_var_head.forward(h)};
}

void CevaeModel::encoder_backward(const nn::Matrix& grad_mu, const nn::Matrix& grad_log_var) {
  nn::Matrix g = encoder_.mu_head.backward(grad_mu);
  const nn::Matrix g2 = encoder_.log_var_head.backward(grad_log_var);
  auto dst = g.data();
  const auto src = g2.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  g = encoder_.hidden.backward(encoder_.relu2.backward(g));
  g = encoder_.norm.backward(g);
  encoder_.input.backward(encoder_.relu1.backward(g));
}

ElboReport CevaeModel::elbo_with_noise(const ModelInputs& batch, const nn::Matrix& noise, bool accumulate_grads) {
  const std::size_t n = batch.rows();
  const std::size_t latent = config_.latent_dim;
  if (noise.rows() != n || noise.cols() != latent)
    throw ShapeError("elbo: noise " + noise.shape_string() + " does not match batch of " + std::to_string(n) +
                     " rows and latent dim " + std::to_string(latent));
  const double beta = config_.kl_weight;

  auto [mu, log_var] = encode(batch, true);
  nn::Matrix z(n, latent);
  nn::Matrix sd(n, latent);
  for (std::size_t i = 0; i < z.size(); ++i) {
    sd.data()[i] = std::exp(0.5 * log_var.data()[i]);
    z.data()[i] = mu.data()[i] + sd.data()[i] * noise.data()[i];
  }

  const nn::Matrix pt = treatment_decoder_.forward(treatment_input(z, batch));
  const nn::Matrix py = outcome_decoder_.forward(outcome_input(z, batch, batch.t));

  ElboReport report;
  double recon_t = 0.0, recon_y = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    recon_t += log_bernoulli(batch.t(i, 0), pt(i, 0));
    recon_y += log_bernoulli(batch.y(i, 0), py(i, 0));
  }
  report.recon_t = recon_t / static_cast<double>(n);
  report.recon_y = recon_y / static_cast<double>(n);
  report.kl = kl_diag_gaussian(mu, log_var);
  report.elbo = report.recon_t + report.recon_y - beta * report.kl;
  report.mc_samples = 1;

  if (!accumulate_grads) return report;

  // Gradients of the loss -ELBO.
  const double inv_n = 1.0 / static_cast<double>(n);
  nn::Matrix grad_pt(n, 1), grad_py(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = batch.t(i, 0), p = pt(i, 0);
    grad_pt(i, 0) = -inv_n * (t / p - (1.0 - t) / (1.0 - p));
    const double y = batch.y(i, 0), q = py(i, 0);
    grad_py(i, 0) = -inv_n * (y / q - (1.0 - y) / (1.0 - q));
  }
  const nn::Matrix grad_t_in = treatment_decoder_.backward(grad_pt);
  const nn::Matrix grad_y_in = outcome_decoder_.backward(grad_py);

  nn::Matrix grad_mu(n, latent), grad_log_var(n, latent);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < latent; ++j) {
      const double grad_z = grad_t_in(i, j) + grad_y_in(i, j);
      const double lv = log_var(i, j);
      grad_mu(i, j) = grad_z + beta * inv_n * mu(i, j);
      grad_log_var(i, j) = grad_z * noise(i, j) * 0.5 * sd(i, j) + beta * inv_n * 0.5 * (std::exp(lv) - 1.0);
    }
  }
  encoder_backward(grad_mu, grad_log_var);
  return report;
}

ElboReport CevaeModel::train_step(const ModelInputs& batch, Rng& noise_rng) {
  const nn::Matrix noise = standard_normal(batch.rows(), config_.latent_dim, noise_rng);
  return elbo_with_noise(batch, noise, true);
}

ElboReport CevaeModel::evaluate(const ModelInputs& inputs, std::size_t mc_samples, std::uint64_t seed) {
  if (mc_samples < 1) throw ValidationError("evaluate: mc_samples must be >= 1");
  const std::size_t n = inputs.rows();
  if (n == 0) throw ValidationError("evaluate: empty input");
  const std::size_t latent = config_.latent_dim;
  auto [mu, log_var] = encode(inputs, false);
  Rng rng(seed);
  double recon_t = 0.0, recon_y = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    nn::Matrix z(n, latent);
    for (std::size_t i = 0; i < z.size(); ++i)
      z.data()[i] = mu.data()[i] + std::exp(0.5 * log_var.data()[i]) * rng.normal();
    const nn::Matrix pt = treatment_decoder_.forward(treatment_input(z, inputs));
    const nn::Matrix py = outcome_decoder_.forward(outcome_input(z, inputs, inputs.t));
    for (std::size_t i = 0; i < n; ++i) {
      recon_t += log_bernoulli(inputs.t(i, 0), pt(i, 0));
      recon_y += log_bernoulli(inputs.y(i, 0), py(i, 0));
    }
  }
  const double denom = static_cast<double>(n) * static_cast<double>(mc_samples);
  ElboReport report;
  report.recon_t = recon_t / denom;
  report.recon_y = recon_y / denom;
  report.kl = kl_diag_gaussian(mu, log_var);
  report.elbo = report.recon_t + report.recon_y - config_.kl_weight * report.kl;
  report.mc_samples = mc_samples;
  report.seed = seed;
  return report;
}

LatentPosterior CevaeModel::posterior(const ModelInputs& inputs) {
  auto [mu, log_var] = encode(inputs, false);
  return {std::move(mu), std::move(log_var)};
}

double CevaeModel::estimate_ate(const ModelInputs& inputs, std::size_t mc_samples, std::uint64_t seed) {
  if (mc_samples < 1) throw ValidationError("estimate_ate: mc_samples must be >= 1");
  const std::size_t n = inputs.rows();
  if (n == 0) throw ValidationError("estimate_ate: empty input");
  const std::size_t latent = config_.latent_dim;
  auto [mu, log_var] = encode(inputs, false);
  const nn::Matrix treated = constant_column(n, 1.0);
  const nn::Matrix control = constant_column(n, 0.0);
  Rng rng(seed);
  double total = 0.0;
  for (std::size_t s = 0; s < mc_samples; ++s) {
    nn::Matrix z(n, latent);
    for (std::size_t i = 0; i < z.size(); ++i)
      z.data()[i] = mu.data()[i] + std::exp(0.5 * log_var.data()[i]) * rng.normal();
    const nn::Matrix p1 = outcome_decoder_.forward(outcome_input(z, inputs, treated));
    const nn::Matrix p0 = outcome_decoder_.forward(outcome_input(z, inputs, control));
    for (std::size_t i = 0; i < n; ++i) total += p1(i, 0) - p0(i, 0);
  }
  return total / (static_cast<double>(n) * static_cast<double>(mc_samples));
}

std::vector<nn::ParamRef> CevaeModel::parameters() {
  std::vector<nn::ParamRef> out;
  encoder_.input.collect(out, "encoder.input");
  encoder_.norm.collect(out, "encoder.norm");
  encoder_.hidden.collect(out, "encoder.hidden");
  encoder_.mu_head.collect(out, "encoder.mu_head");
  encoder_.log_var_head.collect(out, "encoder.log_var_head");
  treatment_decoder_.input.collect(out, "treatment_decoder.input");
  treatment_decoder_.hidden.collect(out, "treatment_decoder.hidden");
  treatment_decoder_.output.collect(out, "treatment_decoder.output");
  outcome_decoder_.input.collect(out, "outcome_decoder.input");
  outcome_decoder_.hidden.collect(out, "outcome_decoder.hidden");
  outcome_decoder_.output.collect(out, "outcome_decoder.output");
  return out;
}

void CevaeModel::zero_grad() {
  for (nn::LinearLayer* layer : {&encoder_.input, &encoder_.hidden, &encoder_.mu_head, &encoder_.log_var_head,
                                 &treatment_decoder_.input, &treatment_decoder_.hidden, &treatment_decoder_.output,
                                 &outcome_decoder_.input, &outcome_decoder_.hidden, &outcome_decoder_.output})
    layer->zero_grad();
  encoder_.norm.zero_grad();
}

std::vector<unsigned char> CevaeModel::activation_pattern() const {
  std::vector<unsigned char> out;
  for (const nn::ReluLayer* relu : {&encoder_.relu1, &encoder_.relu2, &treatment_decoder_.relu1,
                                    &treatment_decoder_.relu2, &outcome_decoder_.relu1, &outcome_decoder_.relu2})
    out.insert(out.end(), relu->mask().begin(), relu->mask().end());
  return out;
}

} // namespace vigor::cevae
