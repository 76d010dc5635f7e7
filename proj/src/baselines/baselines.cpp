#include "emf/baselines/baselines.hpp"

#include "emf/error.hpp"

#include <string>

namespace emf::baselines {

using nn::Matrix;

Decomposition dlinear_decompose(std::span<const double> x, std::size_t m) {
  if (x.empty()) throw SizeError("dlinear_decompose: empty input");
  if (m < 1) throw ConfigError("dlinear_decompose: half window m must be at least 1");
  const std::size_t L = x.size();
  std::vector<double> padded;
  padded.reserve(L + 2 * m);
  padded.insert(padded.end(), m, x.front());
  padded.insert(padded.end(), x.begin(), x.end());
  padded.insert(padded.end(), m, x.back());

  const double width = static_cast<double>(2 * m + 1);
  Decomposition out{std::vector<double>(L), std::vector<double>(L)};
  for (std::size_t t = 0; t < L; ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; k <= 2 * m; ++k) sum += padded[t + k];
    out.trend[t] = sum / width;
    out.season[t] = x[t] - out.trend[t];
  }
  return out;
}

// ---------------------------------------------------------------------------

void DLinearConfig::validate() const {
  if (lookback < 1) throw ConfigError("DLinear: lookback must be positive");
  if (horizon < 1) throw ConfigError("DLinear: horizon must be positive");
  if (half_window < 1) throw ConfigError("DLinear: half window m must be at least 1");
}

nlohmann::json DLinearConfig::to_json() const {
  return {{"lookback", lookback}, {"horizon", horizon}, {"half_window", half_window}};
}

DLinearConfig DLinearConfig::from_json(const nlohmann::json& j) {
  DLinearConfig c;
  c.lookback = j.value("lookback", c.lookback);
  c.horizon = j.value("horizon", c.horizon);
  c.half_window = j.value("half_window", c.half_window);
  return c;
}

namespace {

const DLinearConfig& checked(const DLinearConfig& cfg) {
  cfg.validate();
  return cfg;
}

// Column j is the trend of the unit impulse e_j.
Matrix averaging_matrix(std::size_t L, std::size_t m) {
  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(L), static_cast<Eigen::Index>(L));
  std::vector<double> e(L, 0.0);
  for (std::size_t j = 0; j < L; ++j) {
    e[j] = 1.0;
    const auto d = dlinear_decompose(e, m);
    for (std::size_t i = 0; i < L; ++i) a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = d.trend[i];
    e[j] = 0.0;
  }
  return a;
}

}  // namespace

DLinearModel::DLinearModel(const DLinearConfig& cfg, std::uint64_t seed)
    : cfg_(checked(cfg)), averaging_(averaging_matrix(cfg.lookback, cfg.half_window)) {
  nn::Rng rng(seed);
  const auto L = static_cast<Eigen::Index>(cfg_.lookback);
  const auto O = static_cast<Eigen::Index>(cfg_.horizon);
  w_trend_ = nn::Parameter("trend.weight", nn::fan_in_uniform(O, L, L, rng));
  w_season_ = nn::Parameter("season.weight", nn::fan_in_uniform(O, L, L, rng));
}

std::unique_ptr<model::Forecaster> DLinearModel::clone() const { return std::make_unique<DLinearModel>(*this); }

Matrix DLinearModel::predict_batch(const Matrix& x) const {
  const Matrix trend = x * averaging_.transpose();
  const Matrix season = x - trend;
  return trend * w_trend_.value.transpose() + season * w_season_.value.transpose();
}

Matrix DLinearModel::forward(const Matrix& x) {
  require_lookback(x);
  trend_ = x * averaging_.transpose();
  season_ = x - trend_;
  cached_ = true;
  return trend_ * w_trend_.value.transpose() + season_ * w_season_.value.transpose();
}

Matrix DLinearModel::backward(const Matrix& g) {
  if (!cached_) throw StateError("DLinear: backward called before forward");
  if (g.rows() != trend_.rows() || g.cols() != w_trend_.value.rows()) {
    throw DimensionError("DLinear: upstream gradient " + nn::shape_of(g) + " does not match output shape");
  }
  w_trend_.grad.noalias() += g.transpose() * trend_;
  w_season_.grad.noalias() += g.transpose() * season_;
  const Matrix d_trend = g * w_trend_.value;
  const Matrix d_season = g * w_season_.value;
  // x -> trend is x A^T, season is x (I - A)^T.
  return d_season + (d_trend - d_season) * averaging_;
}

// ---------------------------------------------------------------------------

void MlpConfig::validate() const {
  if (lookback < 1) throw ConfigError("MLP: lookback must be positive");
  if (horizon < 1) throw ConfigError("MLP: horizon must be positive");
  for (std::size_t h : hidden) {
    if (h < 1) throw ConfigError("MLP: hidden widths must be positive");
  }
}

nlohmann::json MlpConfig::to_json() const {
  return {{"lookback", lookback}, {"horizon", horizon}, {"hidden", hidden}, {"activation", "relu"}};
}

MlpConfig MlpConfig::from_json(const nlohmann::json& j) {
  MlpConfig c;
  c.lookback = j.value("lookback", c.lookback);
  c.horizon = j.value("horizon", c.horizon);
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  return c;
}

MlpModel::MlpModel(const MlpConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  nn::Rng rng(seed);
  auto in = static_cast<Eigen::Index>(cfg_.lookback);
  for (std::size_t i = 0; i < cfg_.hidden.size(); ++i) {
    const auto out = static_cast<Eigen::Index>(cfg_.hidden[i]);
    net_.add(std::make_unique<nn::Dense>("layers." + std::to_string(i), in, out, true, rng));
    net_.add(std::make_unique<nn::ReLU>());
    in = out;
  }
  net_.add(std::make_unique<nn::Dense>("layers." + std::to_string(cfg_.hidden.size()), in,
                                       static_cast<Eigen::Index>(cfg_.horizon), true, rng));
}

MlpModel::MlpModel(std::size_t lookback, std::size_t horizon, std::vector<nn::DenseParams> layers) {
  if (layers.empty()) throw ConfigError("MLP: at least one layer is required");
  cfg_.lookback = lookback;
  cfg_.horizon = horizon;
  cfg_.hidden.clear();
  auto expected_in = static_cast<Eigen::Index>(lookback);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.cols() != expected_in) {
      throw DimensionError("MLP: layer " + std::to_string(i) + " weight " + nn::shape_of(layers[i].weight) +
                           " expects input width " + std::to_string(expected_in));
    }
    expected_in = layers[i].weight.rows();
    if (i + 1 < layers.size()) cfg_.hidden.push_back(static_cast<std::size_t>(expected_in));
  }
  if (expected_in != static_cast<Eigen::Index>(horizon)) {
    throw DimensionError("MLP: last layer produces " + std::to_string(expected_in) + " outputs, horizon is " +
                         std::to_string(horizon));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    net_.add(std::make_unique<nn::Dense>("layers." + std::to_string(i), std::move(layers[i])));
    if (i + 1 < layers.size()) net_.add(std::make_unique<nn::ReLU>());
  }
}

MlpModel::MlpModel(const MlpModel& other) : model::Forecaster(other), cfg_(other.cfg_) {
  for (std::size_t i = 0; i < other.net_.size(); ++i) {
    if (const auto* dense = dynamic_cast<const nn::Dense*>(&other.net_.at(i))) {
      nn::DenseParams p{dense->weight().value, std::nullopt};
      if (dense->bias()) p.bias = nn::RowVector(dense->bias()->value.row(0));
      const std::string& full = dense->weight().name;
      net_.add(std::make_unique<nn::Dense>(full.substr(0, full.rfind('.')), std::move(p)));
    } else {
      net_.add(std::make_unique<nn::ReLU>());
    }
  }
}

std::unique_ptr<model::Forecaster> MlpModel::clone() const { return std::make_unique<MlpModel>(*this); }

// ---------------------------------------------------------------------------

PersistenceForecaster::PersistenceForecaster(std::size_t lookback, std::size_t horizon)
    : lookback_(lookback), horizon_(horizon) {
  if (lookback < 1 || horizon < 1) throw ConfigError("persistence: lookback and horizon must be positive");
}

nlohmann::json PersistenceForecaster::config_json() const {
  return {{"lookback", lookback_}, {"horizon", horizon_}};
}

std::unique_ptr<model::Forecaster> PersistenceForecaster::clone() const {
  return std::make_unique<PersistenceForecaster>(*this);
}

Matrix PersistenceForecaster::predict_batch(const Matrix& x) const {
  return x.col(x.cols() - 1).replicate(1, static_cast<Eigen::Index>(horizon_));
}

Matrix PersistenceForecaster::forward(const Matrix& x) {
  require_lookback(x);
  cached_rows_ = x.rows();
  return predict_batch(x);
}

Matrix PersistenceForecaster::backward(const Matrix& g) {
  if (cached_rows_ < 0) throw StateError("persistence: backward called before forward");
  Matrix dx = Matrix::Zero(g.rows(), static_cast<Eigen::Index>(lookback_));
  dx.col(dx.cols() - 1) = g.rowwise().sum();
  return dx;
}

std::vector<double> persistence_forecast(std::span<const double> x, std::size_t horizon) {
  if (x.empty()) throw SizeError("persistence_forecast: empty lookback window");
  return std::vector<double>(horizon, x.back());
}

}  // namespace emf::baselines
