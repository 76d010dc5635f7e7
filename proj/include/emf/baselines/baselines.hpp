#pragma once

#include "emf/model/forecaster.hpp"
#include "emf/nn/layers.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace emf::baselines {

struct Decomposition {
  std::vector<double> trend;
  std::vector<double> season;
};

/// Centered moving average of width 2m+1 over the series padded with m copies
/// of its first and last values; season = x - trend.
Decomposition dlinear_decompose(std::span<const double> x, std::size_t m);

struct DLinearConfig {
  std::size_t lookback = 336;
  std::size_t horizon = 96;
  std::size_t half_window = 12;  // m, kernel 2m+1

  void validate() const;
  nlohmann::json to_json() const;
  static DLinearConfig from_json(const nlohmann::json& j);
};

/// y = W1 trend(x) + W2 season(x). No bias, so the map is linear in x.
class DLinearModel final : public model::Forecaster {
 public:
  DLinearModel(const DLinearConfig& cfg, std::uint64_t seed);

  model::ModelKind kind() const override { return model::ModelKind::dlinear; }
  std::size_t lookback() const override { return cfg_.lookback; }
  std::size_t horizon() const override { return cfg_.horizon; }
  nlohmann::json config_json() const override { return cfg_.to_json(); }
  std::unique_ptr<model::Forecaster> clone() const override;

  nn::Matrix forward(const nn::Matrix& x) override;
  nn::Matrix backward(const nn::Matrix& grad_out) override;
  std::vector<nn::Parameter*> parameters() override { return {&w_trend_, &w_season_}; }

  const DLinearConfig& config() const { return cfg_; }
  nn::Parameter& trend_weight() { return w_trend_; }
  nn::Parameter& season_weight() { return w_season_; }

 protected:
  nn::Matrix predict_batch(const nn::Matrix& inputs) const override;

 private:
  DLinearConfig cfg_;
  nn::Matrix averaging_;  // [L x L]; trend rows = x * averaging_^T
  nn::Parameter w_trend_;
  nn::Parameter w_season_;
  nn::Matrix trend_;
  nn::Matrix season_;
  bool cached_ = false;
};

struct MlpConfig {
  std::size_t lookback = 336;
  std::size_t horizon = 96;
  std::vector<std::size_t> hidden = {512};

  void validate() const;
  nlohmann::json to_json() const;
  static MlpConfig from_json(const nlohmann::json& j);
};

/// Dense layers with bias and relu between them; the output layer is affine.
class MlpModel final : public model::Forecaster {
 public:
  MlpModel(const MlpConfig& cfg, std::uint64_t seed);
  /// Explicit layers; dimensions must chain from L to O.
  MlpModel(std::size_t lookback, std::size_t horizon, std::vector<nn::DenseParams> layers);
  MlpModel(const MlpModel& other);

  model::ModelKind kind() const override { return model::ModelKind::mlp; }
  std::size_t lookback() const override { return cfg_.lookback; }
  std::size_t horizon() const override { return cfg_.horizon; }
  nlohmann::json config_json() const override { return cfg_.to_json(); }
  std::unique_ptr<model::Forecaster> clone() const override;

  nn::Matrix forward(const nn::Matrix& x) override { return net_.forward(x); }
  nn::Matrix backward(const nn::Matrix& grad_out) override { return net_.backward(grad_out); }
  std::vector<nn::Parameter*> parameters() override { return net_.parameters(); }

 protected:
  nn::Matrix predict_batch(const nn::Matrix& inputs) const override { return net_.apply(inputs); }

 private:
  MlpConfig cfg_;
  nn::Sequential net_;
};

/// Repeats the last observed value across the horizon.
class PersistenceForecaster final : public model::Forecaster {
 public:
  PersistenceForecaster(std::size_t lookback, std::size_t horizon);

  model::ModelKind kind() const override { return model::ModelKind::persistence; }
  std::size_t lookback() const override { return lookback_; }
  std::size_t horizon() const override { return horizon_; }
  nlohmann::json config_json() const override;
  std::unique_ptr<model::Forecaster> clone() const override;

  nn::Matrix forward(const nn::Matrix& x) override;
  nn::Matrix backward(const nn::Matrix& grad_out) override;
  std::vector<nn::Parameter*> parameters() override { return {}; }

 protected:
  nn::Matrix predict_batch(const nn::Matrix& inputs) const override;

 private:
  std::size_t lookback_;
  std::size_t horizon_;
  Eigen::Index cached_rows_ = -1;
};

std::vector<double> persistence_forecast(std::span<const double> x, std::size_t horizon);

}  // namespace emf::baselines
