#pragma once

#include "emf/data/pipeline.hpp"
#include "emf/model/factory.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emf::train {

/// (1/O) sum (y_i - yhat_i)^2.
double mse(std::span<const double> y, std::span<const double> yhat);
/// Mean over examples of the per-example MSE.
double mse(const nn::Matrix& y, const nn::Matrix& yhat);

struct TrainConfig {
  std::size_t max_epochs = 100;
  std::size_t batch_size = 2048;
  std::size_t patience = 20;
  double lr = 1e-3;
  std::uint64_t seed = 0;

  /// max_epochs may be 0 (no training); otherwise 1 <= patience <= max_epochs.
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
};

struct TrainHistory {
  std::vector<double> train_mse;
  std::vector<double> val_mse;
  std::size_t best_epoch = 0;  // 1-based; 0 when no epoch ran
  double best_val_mse = 0.0;
  bool stopped_early = false;

  nlohmann::json to_json() const;
};

struct EpochStats {
  std::size_t epoch;  // 1-based
  double train_mse;
  double val_mse;
  bool improved;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam on the MSE objective with early stopping on validation MSE.
/// The model ends holding the parameters of its best validation epoch.
TrainHistory train(model::Forecaster& model, const data::WindowDataset& train_set,
                   const data::WindowDataset& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

struct Evaluation {
  double mse = 0.0;
  nn::Matrix forecasts;
};

Evaluation evaluate(const model::Forecaster& model, const data::WindowDataset& set);

struct SweepCell {
  model::ArchitectureConfig arch;
  TrainConfig train;
};

struct SweepOutcome {
  std::size_t index = 0;
  std::size_t param_count = 0;
  std::optional<double> val_mse;  // empty when the cell failed
  std::string error;
  TrainHistory history;
};

struct SweepResult {
  std::vector<SweepOutcome> cells;
  std::optional<std::size_t> best;  // index into cells
};

/// Trains every cell and picks the lowest validation MSE; ties go to fewer
/// parameters, then the lower grid index. A failing cell is recorded and skipped.
/// With parallel set, cells run concurrently; results do not depend on it.
SweepResult sweep(const std::vector<SweepCell>& grid, const data::WindowDataset& train_set,
                  const data::WindowDataset& val_set, bool parallel = false);

}  // namespace emf::train
