#pragma once

#include "vigor/cevae/model.hpp"
#include "vigor/data/dataset.hpp"
#include "vigor/data/split.hpp"

#include <optional>
#include <vector>

namespace vigor::cevae {

struct EpochTrace {
  std::size_t epoch = 0;
  double train_elbo = 0.0; ///< mean of per-batch training ELBOs
  std::optional<double> eval_elbo;
};

struct TrainResult {
  std::vector<EpochTrace> trace;
  std::size_t steps = 0;
  std::optional<ElboReport> eval_report; ///< final held-out report, when an eval set was given
};

/// Number of optimiser steps per epoch: ceil(n / batch_size), except that a
/// trailing batch of one row is merged into the previous batch.
std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size);

/// Mini-batch Adam on -ELBO. Rows are reshuffled every epoch from a stream
/// derived from config.seed. Throws NumericError identifying epoch and batch
/// if the loss becomes non-finite.
TrainResult train(CevaeModel& model, const data::Dataset& train_set, const data::Dataset* eval_set = nullptr);

struct FitResult {
  CevaeModel model;
  TrainResult training;
  ElboReport eval_report;
};

/// Fits scaling on the full dataset, trains on split.train and evaluates on
/// split.eval (or on the training rows when the eval part is empty).
FitResult fit(const data::Dataset& dataset, const data::Split& split, const CevaeConfig& config);

} // namespace vigor::cevae
