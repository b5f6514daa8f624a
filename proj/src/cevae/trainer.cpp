#include "vigor/cevae/trainer.hpp"

#include "vigor/error.hpp"

#include <cmath>
#include <numeric>

namespace vigor::cevae {

namespace {
constexpr std::uint64_t kShuffleStream = 202;
constexpr std::uint64_t kNoiseStream = 303;
} // namespace

std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) {
  if (n == 0) return 0;
  std::size_t count = (n + batch_size - 1) / batch_size;
  if (count > 1 && n % batch_size == 1) --count;
  return count;
}

TrainResult train(CevaeModel& model, const data::Dataset& train_set, const data::Dataset* eval_set) {
  const CevaeConfig& config = model.config();
  const std::size_t n = train_set.size();
  if (n == 0) throw ValidationError("train: empty dataset");
  if (n < 2) throw ValidationError("train: batch normalisation needs at least 2 training rows");

  const ModelInputs all = model.prepare(train_set);
  std::optional<ModelInputs> eval_inputs;
  if (eval_set && eval_set->size() > 0) eval_inputs = model.prepare(*eval_set);

  Rng shuffle_rng(derive_seed(config.seed, kShuffleStream));
  Rng noise_rng(derive_seed(config.seed, kNoiseStream));
  std::vector<std::size_t> order(n);
  const std::size_t n_batches = batches_per_epoch(n, config.batch_size);

  TrainResult result;
  result.trace.reserve(config.epochs);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    double elbo_sum = 0.0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = (b + 1 == n_batches) ? n : begin + config.batch_size;
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const ModelInputs batch = all.select_rows(rows);
      model.zero_grad();
      const ElboReport report = model.train_step(batch, noise_rng);
      if (!std::isfinite(report.elbo))
        throw NumericError("training diverged: non-finite ELBO at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1));
      try {
        const auto params = model.parameters();
        model.optimizer().step(params);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(b + 1) + ")");
      }
      ++result.steps;
      elbo_sum += report.elbo;
    }
    EpochTrace entry{epoch, elbo_sum / static_cast<double>(n_batches), std::nullopt};
    if (eval_inputs && config.eval_every > 0 && epoch % config.eval_every == 0)
      entry.eval_elbo = model.evaluate(*eval_inputs, config.eval_mc_samples, config.eval_seed).elbo;
    result.trace.push_back(entry);
  }
  if (eval_inputs) result.eval_report = model.evaluate(*eval_inputs, config.eval_mc_samples, config.eval_seed);
  return result;
}

FitResult fit(const data::Dataset& dataset, const data::Split& split, const CevaeConfig& config) {
  CevaeModel model(config, dataset.covariate_count(), InputScaling::fit(dataset));
  const data::Dataset train_set = dataset.subset(split.train);
  const data::Dataset eval_set = split.eval.empty() ? train_set : dataset.subset(split.eval);
  TrainResult training = train(model, train_set, &eval_set);
  ElboReport report = *training.eval_report;
  return {std::move(model), std::move(training), report};
}

} // namespace vigor::cevae
