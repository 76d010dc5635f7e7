#include <catch2/catch_amalgamated.hpp>

#include "emf/baselines/baselines.hpp"
#include "emf/data/synthetic.hpp"
#include "emf/error.hpp"
#include "emf/nn/adam.hpp"
#include "emf/nn/gradient_check.hpp"
#include "emf/train/trainer.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace emf;
using train::evaluate;
using train::mse;
using train::Evaluation;
using train::SweepCell;
using train::SweepResult;
using train::TrainConfig;
using train::TrainHistory;
using train::sweep;
using nn::Matrix;

namespace {

// Predicts one learnable constant for every horizon step.
class ConstantForecaster final : public model::Forecaster {
 public:
  ConstantForecaster(std::size_t lookback, std::size_t horizon)
      : lookback_(lookback), horizon_(horizon), level_("level", Matrix::Zero(1, 1)) {}

  model::ModelKind kind() const override { return model::ModelKind::persistence; }
  std::size_t lookback() const override { return lookback_; }
  std::size_t horizon() const override { return horizon_; }
  nlohmann::json config_json() const override { return nlohmann::json::object(); }
  std::unique_ptr<model::Forecaster> clone() const override { return std::make_unique<ConstantForecaster>(*this); }

  Matrix forward(const Matrix& x) override {
    rows_ = x.rows();
    return predict_batch(x);
  }
  Matrix backward(const Matrix& grad_out) override {
    level_.grad(0, 0) += grad_out.sum();
    return Matrix::Zero(rows_, static_cast<Eigen::Index>(lookback_));
  }
  std::vector<nn::Parameter*> parameters() override { return {&level_}; }
  double level() const { return level_.value(0, 0); }

 protected:
  Matrix predict_batch(const Matrix& x) const override {
    return Matrix::Constant(x.rows(), static_cast<Eigen::Index>(horizon_), level_.value(0, 0));
  }

 private:
  std::size_t lookback_;
  std::size_t horizon_;
  nn::Parameter level_;
  Eigen::Index rows_ = 0;
};

data::WindowDataset constant_targets(Eigen::Index n, double value) {
  data::WindowDataset d;
  d.lookback = 3;
  d.horizon = 2;
  d.inputs = Matrix::Zero(n, 3);
  d.targets = Matrix::Constant(n, 2, value);
  return d;
}

struct Splits {
  data::WindowDataset train;
  data::WindowDataset val;
  data::WindowDataset test;
};

Splits cycle_splits(std::size_t L, std::size_t O, std::size_t T = 3000, double noise = 0.1) {
  const data::TimeSeries s = data::cyclic_fixture(T, {{48.0, 1.0}}, noise, 5);
  const data::SplitSeries split = data::split_and_normalize(s);
  return {data::make_windows(split.train.values, L, O), data::make_windows(split.val.values, L, O),
          data::make_windows(split.test.values, L, O)};
}

TrainConfig quick(std::size_t epochs, double lr, std::uint64_t seed = 0) {
  TrainConfig c;
  c.max_epochs = epochs;
  c.patience = epochs;
  c.batch_size = 64;
  c.lr = lr;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("mse examples", "[trainer][mse]") {
  const std::vector<double> y{0, 0};
  CHECK(mse(y, y) == 0.0);
  CHECK(mse(y, std::vector<double>{1, 3}) == 5.0);
  CHECK(mse(std::vector<double>{0, 0}, std::vector<double>{3, 9}) == Catch::Approx(9.0 * 5.0));
  CHECK_THROWS_AS(mse(y, std::vector<double>{1}), DimensionError);
  CHECK_THROWS_AS(mse(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), DimensionError);
}

TEST_CASE("mean of per-example MSE equals the flat MSE", "[trainer][mse][property]") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 30; ++trial) {
    Matrix a(1 + trial, 1 + trial % 7);
    Matrix b(a.rows(), a.cols());
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      a.data()[i] = n01(rng);
      b.data()[i] = n01(rng);
    }
    CHECK(std::abs(mse(a, b) - (a - b).squaredNorm() / static_cast<double>(a.size())) < 1e-12);
    CHECK(std::abs(mse(a, b) - nn::mse_loss(b, a)) < 1e-12);
  }
}

TEST_CASE("train config validation", "[trainer][config]") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.patience = 101;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = TrainConfig{};
  c.max_epochs = 0;
  CHECK_NOTHROW(c.validate());
  const TrainConfig d = TrainConfig::from_json({{"max_epochs", 7}, {"lr", 0.5}});
  CHECK(d.max_epochs == 7);
  CHECK(d.lr == 0.5);
  CHECK(d.batch_size == 2048);
}

TEST_CASE("early stopping trace", "[trainer][early-stopping]") {
  ConstantForecaster m(3, 2);
  TrainConfig cfg;
  cfg.max_epochs = 10;
  cfg.patience = 1;
  cfg.batch_size = 8;
  cfg.lr = 0.1;
  // Training pulls the level toward +1 while validation wants -1, so val MSE rises after epoch 1.
  const TrainHistory h = train::train(m, constant_targets(8, 1.0), constant_targets(4, -1.0), cfg);
  CHECK(h.stopped_early);
  CHECK(h.val_mse.size() == 2);
  CHECK(h.train_mse.size() == 2);
  CHECK(h.best_epoch == 1);
  CHECK(h.val_mse[1] > h.val_mse[0]);
  CHECK(h.best_val_mse == h.val_mse[0]);
  // Best weights are restored: one Adam step of 0.1 from 0.
  CHECK(m.level() == Catch::Approx(0.1).epsilon(1e-6));
  CHECK(evaluate(m, constant_targets(4, -1.0)).mse == Catch::Approx(h.best_val_mse).margin(1e-12));
}

TEST_CASE("history invariants", "[trainer][property]") {
  const Splits s = cycle_splits(24, 4, 1500);
  for (std::uint64_t seed : {1u, 2u}) {
    baselines::DLinearModel m({24, 4, 3}, seed);
    TrainConfig cfg = quick(12, 3e-3, seed);
    cfg.patience = 3;
    const TrainHistory h = train::train(m, s.train, s.val, cfg);
    REQUIRE(!h.val_mse.empty());
    CHECK(h.val_mse.size() <= cfg.max_epochs);
    const auto min_it = std::min_element(h.val_mse.begin(), h.val_mse.end());
    CHECK(h.best_epoch == static_cast<std::size_t>(min_it - h.val_mse.begin()) + 1);
    CHECK(h.best_val_mse == *min_it);
    // The returned snapshot is the one that produced best_val_mse.
    CHECK(std::abs(evaluate(m, s.val).mse - h.best_val_mse) < 1e-10);
  }
}

TEST_CASE("DLinear learns a persistence-learnable cycle", "[trainer]") {
  const Splits s = cycle_splits(48, 4, 4000, 0.05);
  baselines::DLinearModel m({48, 4, 3}, 1);
  const TrainHistory h = train::train(m, s.train, s.val, quick(40, 1e-2));
  const double mean = s.val.targets.mean();
  const double variance = (s.val.targets.array() - mean).square().mean();
  INFO("best val mse " << h.best_val_mse << " target variance " << variance);
  CHECK(h.best_val_mse < 0.1 * variance);
}

TEST_CASE("training is deterministic for a fixed seed", "[trainer][determinism]") {
  const Splits s = cycle_splits(32, 8, 1500);
  model::EmfConfig ec;
  ec.lookback = 32;
  ec.horizon = 8;
  ec.patch_len = 8;
  ec.patch_stride = 8;
  ec.embed_dim = 8;
  ec.hidden_dim = 16;
  ec.blocks = 1;
  model::EMForecaster a(ec, 3);
  model::EMForecaster b(ec, 3);
  const TrainHistory ha = train::train(a, s.train, s.val, quick(3, 1e-3, 9));
  const TrainHistory hb = train::train(b, s.train, s.val, quick(3, 1e-3, 9));
  CHECK(ha.train_mse == hb.train_mse);
  CHECK(ha.val_mse == hb.val_mse);
  CHECK(ha.to_json() == hb.to_json());
  const auto sa = a.snapshot();
  const auto sb = b.snapshot();
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i] == sb[i]);

  // A different shuffle seed changes the trajectory.
  model::EMForecaster c(ec, 3);
  CHECK(train::train(c, s.train, s.val, quick(3, 1e-3, 10)).train_mse != ha.train_mse);
}

TEST_CASE("max_epochs=0 leaves the model unchanged", "[trainer]") {
  const Splits s = cycle_splits(24, 4, 1000);
  baselines::DLinearModel m({24, 4, 3}, 2);
  const auto before = m.snapshot();
  TrainConfig cfg = quick(0, 1e-2);
  cfg.patience = 5;
  const TrainHistory h = train::train(m, s.train, s.val, cfg);
  CHECK(h.val_mse.empty());
  CHECK(h.best_epoch == 0);
  const auto after = m.snapshot();
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("one small Adam step lowers the loss of a single example", "[trainer][adam]") {
  model::EmfConfig ec;
  ec.lookback = 16;
  ec.horizon = 4;
  ec.patch_len = 4;
  ec.patch_stride = 4;
  ec.embed_dim = 6;
  ec.hidden_dim = 5;
  ec.blocks = 2;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    model::EMForecaster m(ec, seed);
    Matrix x(1, 16);
    Matrix y(1, 4);
    for (Eigen::Index i = 0; i < 16; ++i) x(0, i) = n01(rng);
    for (Eigen::Index i = 0; i < 4; ++i) y(0, i) = n01(rng);
    m.zero_grad();
    Matrix grad;
    const double before = nn::mse_loss(m.forward(x), y, &grad);
    m.backward(grad);
    auto params = m.parameters();
    nn::AdamState state({1e-6, 0.9, 0.999, 1e-8}, params);
    nn::adam_step(state, params);
    CHECK(nn::mse_loss(m.predict(x), y) < before);
  }
}

TEST_CASE("evaluate examples", "[trainer][evaluate]") {
  baselines::PersistenceForecaster p(5, 3);
  data::WindowDataset flat;
  flat.inputs = Matrix::Constant(4, 5, 2.0);
  flat.targets = Matrix::Constant(4, 3, 2.0);
  const Evaluation e = evaluate(p, flat);
  CHECK(e.mse == 0.0);
  CHECK(e.forecasts.rows() == 4);

  // Horizon-mean predictor on unit-variance noise.
  const auto noise = data::white_noise(20000, 3);
  const data::WindowDataset w = data::make_windows(noise, 5, 3);
  ConstantForecaster zero(5, 3);
  const double m = evaluate(zero, w).mse;
  CHECK(std::abs(m - 1.0) < 0.1);

  CHECK_THROWS_AS(evaluate(p, data::WindowDataset{Matrix(0, 5), Matrix(0, 3), 5, 3}), SizeError);
}

TEST_CASE("divergence reports the last finite epoch", "[trainer][divergence]") {
  ConstantForecaster m(3, 2);
  TrainConfig cfg = quick(5, 1.0);
  data::WindowDataset bad = constant_targets(4, 1.0);
  bad.targets(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(train::train(m, bad, constant_targets(4, 1.0), cfg), TrainingDivergenceError);
}

TEST_CASE("sweep", "[trainer][sweep]") {
  const Splits s = cycle_splits(24, 4, 2000, 0.05);
  model::ArchitectureConfig dlinear;
  dlinear.kind = model::ModelKind::dlinear;
  dlinear.dlinear = {24, 4, 3};
  model::ArchitectureConfig narrow;
  narrow.kind = model::ModelKind::mlp;
  narrow.mlp.lookback = 24;
  narrow.mlp.horizon = 4;
  narrow.mlp.hidden = {1};
  const TrainConfig tc = quick(15, 1e-2, 4);

  const SweepResult single = sweep({{dlinear, tc}}, s.train, s.val);
  REQUIRE(single.best.has_value());
  CHECK(*single.best == 0);
  CHECK(single.cells[0].val_mse.has_value());

  // The linear model matches the data-generating process; the one-unit MLP cannot.
  const std::vector<SweepCell> grid{{narrow, tc}, {dlinear, tc}, {narrow, quick(15, 1e-2, 5)}};
  const SweepResult seq = sweep(grid, s.train, s.val, false);
  REQUIRE(seq.best.has_value());
  CHECK(*seq.best == 1);
  CHECK(seq.cells[1].param_count == 2 * 24 * 4);

  const SweepResult again = sweep(grid, s.train, s.val, false);
  const SweepResult par = sweep(grid, s.train, s.val, true);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(again.cells[i].val_mse == seq.cells[i].val_mse);
    CHECK(par.cells[i].val_mse == seq.cells[i].val_mse);
    CHECK(par.cells[i].history.to_json() == seq.cells[i].history.to_json());
  }
  CHECK(par.best == seq.best);

  // A failing cell is recorded and skipped.
  TrainConfig broken = tc;
  broken.patience = 99;
  const SweepResult mixed = sweep({{dlinear, broken}, {dlinear, tc}}, s.train, s.val);
  CHECK_FALSE(mixed.cells[0].val_mse.has_value());
  CHECK_FALSE(mixed.cells[0].error.empty());
  CHECK(*mixed.best == 1);

  CHECK_THROWS_AS(sweep({}, s.train, s.val), ConfigError);
}

TEST_CASE("sweep ties prefer fewer parameters, then the lower index", "[trainer][sweep]") {
  // Persistence needs no training, so equal cells tie exactly.
  const Splits s = cycle_splits(24, 4, 1500);
  model::ArchitectureConfig persist;
  persist.kind = model::ModelKind::persistence;
  const SweepResult r = sweep({{persist, quick(1, 1e-3)}, {persist, quick(1, 1e-3)}}, s.train, s.val);
  CHECK(*r.cells[0].val_mse == *r.cells[1].val_mse);
  CHECK(*r.best == 0);
}
