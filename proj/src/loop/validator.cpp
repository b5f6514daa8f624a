#include "vigor/loop/validator.hpp"

#include "vigor/error.hpp"
#include "vigor/rng.hpp"

#include <algorithm>
#include <numeric>

namespace vigor::loop {

namespace {
constexpr std::uint64_t kSplitStream = 101;
constexpr std::uint64_t kAteStream = 404;
} // namespace

std::optional<double> Validator::baseline_ate_mean() {
  const auto b = baselines();
  if (b.empty()) return std::nullopt;
  double sum = 0.0;
  for (const auto& s : b) sum += s.ate;
  return sum / static_cast<double>(b.size());
}

data::Split seed_split(const data::Dataset& dataset, double holdout_fraction, std::uint64_t seed) {
  return data::split_indices(dataset.t, holdout_fraction, derive_seed(seed, kSplitStream));
}

CevaeValidator::CevaeValidator(data::Dataset dataset, LoopConfig config)
    : dataset_(std::move(dataset)), config_(std::move(config)) {
  dataset_.validate();
  // ground truth never reaches the models
  dataset_.u_star.reset();
  dataset_.true_ate.reset();
  dataset_.u_hat.reset();
  std::sort(config_.seeds.begin(), config_.seeds.end());
}

void CevaeValidator::ensure_baselines() {
  if (!cache_.empty()) return;
  const data::Dataset full = dataset_;
  for (std::uint64_t seed : config_.seeds) {
    cevae::CevaeConfig cfg = config_.cevae;
    cfg.seed = seed;
    cfg.augmented = false;
    Cached entry;
    entry.split = seed_split(full, cfg.holdout_fraction, seed);
    auto fitted = cevae::fit(full, entry.split, cfg);
    ++baseline_trainings_;
    entry.model.emplace(std::move(fitted.model));
    entry.summary.seed = seed;
    entry.summary.report = fitted.eval_report;
    entry.summary.ate = entry.model->estimate_ate(entry.model->prepare(full), cfg.eval_mc_samples,
                                                  derive_seed(cfg.eval_seed, kAteStream));
    const auto& eval_rows = entry.split.eval.empty() ? entry.split.train : entry.split.eval;
    entry.eval_posterior = entry.model->posterior(entry.model->prepare(full.subset(eval_rows)));
    summaries_.push_back(entry.summary);
    cache_.push_back(std::move(entry));
  }
}

std::span<const SeedBaseline> CevaeValidator::baselines() {
  ensure_baselines();
  return summaries_;
}

const cevae::CevaeModel& CevaeValidator::baseline_model(std::uint64_t seed) {
  ensure_baselines();
  for (const auto& c : cache_)
    if (c.summary.seed == seed) return *c.model;
  throw ValidationError("no baseline for seed " + std::to_string(seed));
}

RoundValidation CevaeValidator::validate(std::span<const double> u) {
  if (u.size() != dataset_.size())
    throw ShapeError("validate: candidate has " + std::to_string(u.size()) + " values for " +
                     std::to_string(dataset_.size()) + " rows");
  ensure_baselines();
  const data::Dataset augmented_data = dataset_.with_u_hat(std::vector<double>(u.begin(), u.end()));

  RoundValidation out;
  std::vector<validation::ValidationSignal> signals;
  double ate_sum = 0.0;
  for (auto& entry : cache_) {
    cevae::CevaeConfig cfg = config_.cevae;
    cfg.seed = entry.summary.seed;
    cfg.augmented = true;
    auto fitted = cevae::fit(augmented_data, entry.split, cfg);

    const auto& eval_rows = entry.split.eval.empty() ? entry.split.train : entry.split.eval;
    std::vector<double> u_eval(eval_rows.size());
    for (std::size_t i = 0; i < eval_rows.size(); ++i) u_eval[i] = u[eval_rows[i]];

    validation::SignalOptions options;
    options.mi_neighbors = config_.mi_neighbors;
    options.mi_seed = entry.summary.seed;
    SeedValidation sv;
    sv.seed = entry.summary.seed;
    sv.signal = validation::build_signal(entry.summary.report, fitted.eval_report, entry.eval_posterior, u_eval, options);
    sv.ate = fitted.model.estimate_ate(fitted.model.prepare(augmented_data), cfg.eval_mc_samples,
                                       derive_seed(cfg.eval_seed, kAteStream));
    ate_sum += sv.ate;
    signals.push_back(sv.signal);
    out.per_seed.push_back(std::move(sv));
  }
  out.summary = validation::aggregate(signals);
  out.ate_mean = ate_sum / static_cast<double>(cache_.size());

  // directional hints come from the lowest seed's baseline
  const auto& first = cache_.front();
  const auto& eval_rows = first.split.eval.empty() ? first.split.train : first.split.eval;
  const data::Dataset eval_set = dataset_.subset(eval_rows);
  out.hints = feedback::derive_hints(first.eval_posterior, eval_set.x, eval_set.column_names,
                                     out.per_seed.front().signal.best_dim, config_.feedback);
  return out;
}

StubValidator::StubValidator(std::vector<validation::SignalSummary> rounds, feedback::Hints hints)
    : rounds_(std::move(rounds)), hints_(std::move(hints)) {}

RoundValidation StubValidator::validate(std::span<const double>) {
  if (next_ >= rounds_.size()) throw StateError("stub validator: no signal left for this round");
  RoundValidation out;
  out.summary = rounds_[next_++];
  out.hints = hints_;
  return out;
}

void to_json(nlohmann::ordered_json& j, const SeedBaseline& b) {
  j = nlohmann::ordered_json{{"seed", b.seed},
                             {"elbo", b.report.elbo},
                             {"recon_t", b.report.recon_t},
                             {"recon_y", b.report.recon_y},
                             {"kl", b.report.kl},
                             {"ate", b.ate}};
}

void to_json(nlohmann::ordered_json& j, const SeedValidation& v) {
  j = nlohmann::ordered_json{{"seed", v.seed}, {"ate", v.ate}, {"signal", v.signal}};
}

void to_json(nlohmann::ordered_json& j, const RoundValidation& r) {
  j = nlohmann::ordered_json{{"summary", r.summary},
                             {"ate_mean", r.ate_mean ? nlohmann::ordered_json(*r.ate_mean) : nlohmann::ordered_json()},
                             {"redundant_covariates", r.hints.redundant_covariates},
                             {"suggested_domains", r.hints.suggested_domains},
                             {"per_seed", r.per_seed}};
}

} // namespace vigor::loop
