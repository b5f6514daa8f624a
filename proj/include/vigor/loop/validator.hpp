#pragma once

#include "vigor/cevae/checkpoint.hpp"
#include "vigor/cevae/trainer.hpp"
#include "vigor/data/dataset.hpp"
#include "vigor/feedback/feedback.hpp"
#include "vigor/loop/config.hpp"
#include "vigor/validation/signal.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace vigor::loop {

struct SeedBaseline {
  std::uint64_t seed = 0;
  cevae::ElboReport report; ///< held-out ELBO of the model without U
  double ate = 0.0;
};

struct SeedValidation {
  std::uint64_t seed = 0;
  validation::ValidationSignal signal;
  double ate = 0.0; ///< augmented model
};

struct RoundValidation {
  std::vector<SeedValidation> per_seed; ///< ordered by seed value
  validation::SignalSummary summary;
  feedback::Hints hints;
  std::optional<double> ate_mean;
};

/// Scores candidate confounder columns against baselines trained once.
class Validator {
public:
  virtual ~Validator() = default;
  virtual RoundValidation validate(std::span<const double> u) = 0;
  virtual std::span<const SeedBaseline> baselines() = 0;
  virtual std::optional<double> baseline_ate_mean();
};

/// Per-seed split of the dataset used by both baseline and augmented models.
data::Split seed_split(const data::Dataset& dataset, double holdout_fraction, std::uint64_t seed);

/// Trains one baseline CEVAE per seed on first use and keeps it. Each
/// candidate is scored by training an augmented model with the same seed and
/// split, then comparing held-out ELBOs; consistency metrics use the cached
/// baseline posterior means on the held-out rows.
class CevaeValidator : public Validator {
public:
  CevaeValidator(data::Dataset dataset, LoopConfig config);

  RoundValidation validate(std::span<const double> u) override;
  std::span<const SeedBaseline> baselines() override;

  /// Baseline model for a seed (trains the baselines if needed).
  const cevae::CevaeModel& baseline_model(std::uint64_t seed);

  /// Number of baseline trainings performed so far.
  std::size_t baseline_trainings() const { return baseline_trainings_; }

private:
  struct Cached {
    SeedBaseline summary;
    data::Split split;
    std::optional<cevae::CevaeModel> model;
    cevae::LatentPosterior eval_posterior;
  };

  void ensure_baselines();

  data::Dataset dataset_;
  LoopConfig config_;
  std::vector<Cached> cache_;
  std::vector<SeedBaseline> summaries_;
  std::size_t baseline_trainings_ = 0;
};

/// Replays fixed signal summaries, one per call; for decision-logic tests.
class StubValidator : public Validator {
public:
  explicit StubValidator(std::vector<validation::SignalSummary> rounds, feedback::Hints hints = {});

  RoundValidation validate(std::span<const double> u) override;
  std::span<const SeedBaseline> baselines() override { return {}; }

private:
  std::vector<validation::SignalSummary> rounds_;
  feedback::Hints hints_;
  std::size_t next_ = 0;
};

void to_json(nlohmann::ordered_json& j, const SeedBaseline& b);
void to_json(nlohmann::ordered_json& j, const SeedValidation& v);
void to_json(nlohmann::ordered_json& j, const RoundValidation& r);

} // namespace vigor::loop
