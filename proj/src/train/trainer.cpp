#include "emf/train/trainer.hpp"

#include "emf/error.hpp"
#include "emf/nn/adam.hpp"
#include "emf/nn/gradient_check.hpp"
#include "emf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace emf::train {

using nn::Matrix;

double mse(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size()) {
    throw DimensionError("mse: lengths " + std::to_string(y.size()) + " and " + std::to_string(yhat.size()));
  }
  if (y.empty()) throw SizeError("mse: empty vectors");
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s / static_cast<double>(y.size());
}

double mse(const Matrix& y, const Matrix& yhat) {
  if (y.rows() != yhat.rows() || y.cols() != yhat.cols()) {
    throw DimensionError("mse: shapes " + nn::shape_of(y) + " and " + nn::shape_of(yhat));
  }
  if (y.size() == 0) throw SizeError("mse: empty batch");
  const Eigen::VectorXd per_example = (y - yhat).array().square().rowwise().mean();
  return per_example.mean();
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be finite and positive");
  if (max_epochs == 0) return;
  if (patience < 1) throw ConfigError("patience must be positive");
  if (patience > max_epochs) {
    throw ConfigError("patience (" + std::to_string(patience) + ") exceeds max_epochs (" +
                      std::to_string(max_epochs) + ")");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"max_epochs", max_epochs}, {"batch_size", batch_size}, {"patience", patience}, {"lr", lr},
          {"seed", seed}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) { return from_json(j, TrainConfig{}); }

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig base) {
  base.max_epochs = j.value("max_epochs", base.max_epochs);
  base.batch_size = j.value("batch_size", base.batch_size);
  base.patience = j.value("patience", base.patience);
  base.lr = j.value("lr", base.lr);
  base.seed = j.value("seed", base.seed);
  return base;
}

nlohmann::json TrainHistory::to_json() const {
  return {{"train_mse", train_mse},
          {"val_mse", val_mse},
          {"best_epoch", best_epoch},
          {"best_val_mse", best_val_mse},
          {"stopped_early", stopped_early},
          {"epochs_run", val_mse.size()}};
}

Evaluation evaluate(const model::Forecaster& model, const data::WindowDataset& set) {
  if (set.empty()) throw SizeError("evaluate: empty dataset");
  Evaluation e;
  e.forecasts = model.predict(set.inputs);
  e.mse = mse(set.targets, e.forecasts);
  return e;
}

namespace {

void require_compatible(const model::Forecaster& model, const data::WindowDataset& set, const char* which) {
  if (set.empty()) throw SizeError(std::string("train: ") + which + " set is empty");
  if (set.inputs.cols() != static_cast<Eigen::Index>(model.lookback()) ||
      set.targets.cols() != static_cast<Eigen::Index>(model.horizon())) {
    throw DimensionError(std::string("train: ") + which + " windows " + nn::shape_of(set.inputs) + " -> " +
                         nn::shape_of(set.targets) + " do not fit model L=" + std::to_string(model.lookback()) +
                         ", O=" + std::to_string(model.horizon()));
  }
}

// Shuffling draws from its own stream so it never aliases model initialisation.
nn::Rng shuffle_stream(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x73687566u};
  return nn::Rng(seq);
}

}  // namespace

TrainHistory train(model::Forecaster& model, const data::WindowDataset& train_set,
                   const data::WindowDataset& val_set, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  cfg.validate();
  TrainHistory history;
  if (cfg.max_epochs == 0) return history;
  require_compatible(model, train_set, "training");
  require_compatible(model, val_set, "validation");

  const std::vector<nn::Parameter*> params = model.parameters();
  nn::AdamOptions opts;
  opts.lr = cfg.lr;
  nn::AdamState adam(opts, params);
  nn::Rng rng = shuffle_stream(cfg.seed);

  const std::size_t n = train_set.size();
  const Eigen::Index L = train_set.inputs.cols();
  const Eigen::Index O = train_set.targets.cols();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  std::vector<Matrix> best = model.snapshot();
  std::size_t since_best = 0;
  Matrix xb;
  Matrix yb;
  Matrix grad;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const int last_finite = static_cast<int>(epoch) - 1;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      xb.resize(static_cast<Eigen::Index>(count), L);
      yb.resize(static_cast<Eigen::Index>(count), O);
      for (std::size_t i = 0; i < count; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = train_set.inputs.row(order[start + i]);
        yb.row(static_cast<Eigen::Index>(i)) = train_set.targets.row(order[start + i]);
      }
      model.zero_grad();
      const Matrix pred = model.forward(xb);
      const double loss = nn::mse_loss(pred, yb, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingDivergenceError("training diverged: non-finite loss in epoch " + std::to_string(epoch),
                                      last_finite);
      }
      model.backward(grad);
      try {
        nn::adam_step(adam, params);
      } catch (const TrainingDivergenceError& e) {
        throw TrainingDivergenceError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ")",
                                      last_finite);
      }
      model.project_parameters();
      loss_sum += loss * static_cast<double>(count);
    }
    for (const nn::Parameter* p : params) {
      if (!nn::all_finite(p->value)) {
        throw TrainingDivergenceError("training diverged: parameter " + p->name + " became non-finite in epoch " +
                                          std::to_string(epoch),
                                      last_finite);
      }
    }

    const double train_loss = loss_sum / static_cast<double>(n);
    const double val_loss = evaluate(model, val_set).mse;
    if (!std::isfinite(val_loss)) {
      throw TrainingDivergenceError("training diverged: non-finite validation MSE in epoch " + std::to_string(epoch),
                                    last_finite);
    }
    history.train_mse.push_back(train_loss);
    history.val_mse.push_back(val_loss);

    const bool improved = history.best_epoch == 0 || val_loss < history.best_val_mse;
    if (improved) {
      history.best_epoch = epoch;
      history.best_val_mse = val_loss;
      best = model.snapshot();
      since_best = 0;
    } else {
      ++since_best;
    }
    if (on_epoch) on_epoch({epoch, train_loss, val_loss, improved});
    if (since_best >= cfg.patience) {
      history.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  model.restore(best);
  return history;
}

SweepResult sweep(const std::vector<SweepCell>& grid, const data::WindowDataset& train_set,
                  const data::WindowDataset& val_set, bool parallel) {
  if (grid.empty()) throw ConfigError("sweep: empty grid");
  if (train_set.empty() || val_set.empty()) throw SizeError("sweep: empty training or validation set");
  SweepResult result;
  result.cells.resize(grid.size());

  auto run_cell = [&](std::size_t i) {
    SweepOutcome& out = result.cells[i];
    out.index = i;
    try {
      auto model = model::make_forecaster(grid[i].arch, train_set.lookback, train_set.horizon, grid[i].train.seed);
      out.param_count = model->parameter_count();
      out.history = train(*model, train_set, val_set, grid[i].train);
      out.val_mse = out.history.best_epoch > 0 ? out.history.best_val_mse : evaluate(*model, val_set).mse;
    } catch (const Error& e) {
      out.error = e.what();
    }
  };
  if (parallel) {
    parallel_for(grid.size(), run_cell);
  } else {
    for (std::size_t i = 0; i < grid.size(); ++i) run_cell(i);
  }

  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const SweepOutcome& c = result.cells[i];
    if (!c.val_mse) continue;
    if (!result.best) {
      result.best = i;
      continue;
    }
    const SweepOutcome& b = result.cells[*result.best];
    if (*c.val_mse < *b.val_mse || (*c.val_mse == *b.val_mse && c.param_count < b.param_count)) result.best = i;
  }
  return result;
}

}  // namespace emf::train
