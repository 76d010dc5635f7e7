#include "emf/cli/selftest.hpp"

#include "emf/baselines/baselines.hpp"
#include "emf/conformal/conformal.hpp"
#include "emf/data/synthetic.hpp"
#include "emf/error.hpp"
#include "emf/model/emforecaster.hpp"
#include "emf/nn/gradient_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace emf::cli {

namespace {

std::string sci(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

nn::Matrix uniform(Eigen::Index rows, Eigen::Index cols, nn::Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  nn::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

SelftestCheck gradient_check_emforecaster() {
  model::EmfConfig cfg;
  cfg.lookback = 32;
  cfg.horizon = 8;
  cfg.patch_len = 8;
  cfg.patch_stride = 8;
  cfg.embed_dim = 8;
  cfg.hidden_dim = 16;
  cfg.blocks = 2;
  model::EMForecaster net(cfg, 1);
  nn::Rng rng(11);
  const auto r = nn::gradient_check(net, uniform(3, 32, rng), uniform(3, 8, rng));
  return {"gradient_check.emforecaster", r.max_relative_error < 1e-4, "max_rel_err=" + sci(r.max_relative_error)};
}

SelftestCheck gradient_check_dlinear() {
  baselines::DLinearConfig cfg{24, 6, 3};
  baselines::DLinearModel net(cfg, 2);
  nn::Rng rng(12);
  // Quadratic in the weights: a wide central step has no truncation error.
  const auto r = nn::gradient_check(net, uniform(4, 24, rng), uniform(4, 6, rng), 1e-3);
  return {"gradient_check.dlinear", r.max_relative_error < 1e-7, "max_rel_err=" + sci(r.max_relative_error)};
}

SelftestCheck gradient_check_mlp() {
  baselines::MlpConfig cfg{16, 4, {12}};
  baselines::MlpModel net(cfg, 3);
  nn::Rng rng(13);
  const auto r = nn::gradient_check(net, uniform(4, 16, rng), uniform(4, 4, rng));
  return {"gradient_check.mlp", r.max_relative_error < 1e-4, "max_rel_err=" + sci(r.max_relative_error)};
}

SelftestCheck revin_identity() {
  nn::Rng rng(21);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::uniform_real_distribution<double> g(0.2, 3.0);
  double worst = 0.0;
  std::vector<double> x(48);
  for (int trial = 0; trial < 1000; ++trial) {
    for (double& v : x) v = u(rng);
    const double gamma = (trial % 2 == 0 ? 1.0 : -1.0) * g(rng);
    const double delta = u(rng);
    const auto [xr, stats] = model::revin_normalize(x, gamma, delta);
    const auto back = model::revin_denormalize(xr, stats);
    for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(back[i] - x[i]));
  }
  return {"revin.identity", worst < 1e-10, "max_abs_err=" + sci(worst)};
}

// Independent rank rule in integer arithmetic: alpha = a/100, so the rank is
// ceil((m+1)(100-a)/100).
SelftestCheck quantile_oracle() {
  std::size_t mismatches = 0;
  std::size_t cases = 0;
  nn::Rng rng(31);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int a : {1, 5, 10, 20}) {
    const double alpha = a / 100.0;
    for (std::size_t m = 1; m <= 50; ++m) {
      ++cases;
      std::vector<double> res(m);
      for (double& v : res) v = u(rng);
      const std::size_t num = (m + 1) * static_cast<std::size_t>(100 - a);
      const std::size_t rank = (num + 99) / 100;
      std::optional<double> expected;
      if (rank <= m) {
        for (double cand : res) {
          const auto covered = std::count_if(res.begin(), res.end(), [&](double r) { return r <= cand; });
          if (static_cast<std::size_t>(covered) >= rank && (!expected || cand < *expected)) expected = cand;
        }
      }
      try {
        const double got = conformal::critical_epsilon(res, alpha);
        if (!expected || got != *expected) ++mismatches;
      } catch (const InsufficientCalibrationError&) {
        if (expected) ++mismatches;
      }
    }
  }
  return {"conformal.rank_oracle", mismatches == 0,
          std::to_string(cases - mismatches) + "/" + std::to_string(cases) + " cases agree"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest() {
  std::vector<SelftestCheck> out;
  for (auto check : {gradient_check_emforecaster, gradient_check_dlinear, gradient_check_mlp, revin_identity,
                     quantile_oracle}) {
    try {
      out.push_back(check());
    } catch (const std::exception& e) {
      out.push_back({"selftest.exception", false, e.what()});
    }
  }
  return out;
}

std::vector<std::filesystem::path> write_fixtures(const std::filesystem::path& dir, std::size_t length,
                                                  std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  const auto daily = dir / "daily_cycle.csv";
  const auto two = dir / "two_cycle.csv";
  data::write_series(daily, data::daily_cycle_fixture(length, seed));
  data::write_series(two, data::cyclic_fixture(length, {{240.0, 1.0}, {120.0, 0.6}}, 0.1, seed + 1, "two-cycle"));
  return {daily, two};
}

}  // namespace emf::cli
