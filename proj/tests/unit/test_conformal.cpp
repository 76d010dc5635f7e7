#include <catch2/catch_amalgamated.hpp>

#include "emf/conformal/conformal.hpp"
#include "emf/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

using namespace emf;
using namespace emf::conformal;
using nn::Matrix;

namespace {

// Smallest eps such that at least `need` residuals are <= eps, by scanning candidates.
std::optional<double> brute_force_epsilon(const std::vector<double>& r, std::size_t need) {
  std::optional<double> best;
  for (double cand : r) {
    const auto count = static_cast<std::size_t>(std::count_if(r.begin(), r.end(), [&](double v) { return v <= cand; }));
    if (count >= need && (!best || cand < *best)) best = cand;
  }
  return best;
}

// ceil((m+1)(1-a)) with a = num/den, in integer arithmetic.
std::size_t exact_rank(std::size_t m, std::size_t num, std::size_t den) {
  const std::size_t top = (m + 1) * (den - num);
  return (top + den - 1) / den;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("collect_residuals examples", "[conformal]") {
  Matrix y(1, 2);
  y << 1, 2;
  Matrix f(1, 2);
  f << 0, 4;
  const CalibrationSet cal = collect_residuals(f, y);
  CHECK(cal.residuals(0, 0) == 1.0);
  CHECK(cal.residuals(0, 1) == 2.0);
  CHECK(cal.m() == 1);
  CHECK(cal.horizon() == 2);
  CHECK(collect_residuals(y, y).residuals.isZero());
  CHECK_THROWS_AS(collect_residuals(Matrix(0, 2), Matrix(0, 2)), SizeError);
  CHECK_THROWS_AS(collect_residuals(Matrix::Zero(2, 2), Matrix::Zero(3, 2)), DimensionError);
}

TEST_CASE("critical_epsilon examples", "[conformal]") {
  std::vector<double> r{9, 3, 1, 7, 5, 2, 8, 4, 6};
  CHECK(critical_rank(9, 0.1) == 9);
  CHECK(critical_epsilon(r, 0.1) == 9.0);
  CHECK(critical_rank(9, 0.05) == 10);
  CHECK_THROWS_AS(critical_epsilon(r, 0.05), InsufficientCalibrationError);
  try {
    critical_epsilon(r, 0.05);
  } catch (const InsufficientCalibrationError& e) {
    CHECK(std::string(e.what()).find("19") != std::string::npos);
  }
  CHECK(critical_epsilon(std::vector<double>{3.5}, 0.5) == 3.5);
  CHECK(critical_epsilon(std::vector<double>{2, 2, 2, 1}, 0.4) == 2.0);
  CHECK_THROWS_AS(critical_epsilon(std::vector<double>{}, 0.1), SizeError);
  CHECK_THROWS_AS(critical_epsilon(r, 0.0), ConfigError);
  CHECK_THROWS_AS(critical_epsilon(r, 1.0), ConfigError);
}

TEST_CASE("critical_epsilon matches the brute-force quantile rule", "[conformal][property]") {
  std::mt19937_64 rng(31);
  std::uniform_int_distribution<int> small(0, 6);
  for (std::size_t m = 1; m <= 50; ++m) {
    for (std::size_t pct : {1u, 5u, 10u, 20u}) {
      std::vector<double> r(m);
      for (double& v : r) v = static_cast<double>(small(rng));  // many ties
      const std::size_t need = exact_rank(m, pct, 100);
      const double alpha = static_cast<double>(pct) / 100.0;
      CHECK(critical_rank(m, alpha) == need);
      const auto expected = need <= m ? brute_force_epsilon(r, need) : std::nullopt;
      if (expected) {
        CHECK(critical_epsilon(r, alpha) == *expected);
      } else {
        CHECK_THROWS_AS(critical_epsilon(r, alpha), InsufficientCalibrationError);
      }
    }
  }
}

TEST_CASE("min_calibration_size", "[conformal]") {
  for (double alpha : {0.01, 0.05, 0.1, 0.2, 0.5, 0.1 / 96.0}) {
    const std::size_t m = min_calibration_size(alpha);
    CHECK(critical_rank(m, alpha) <= m);
    if (m > 1) CHECK(critical_rank(m - 1, alpha) > m - 1);
  }
  CHECK(min_calibration_size(0.1) == 9);
  CHECK(min_calibration_size(0.05) == 19);
  CHECK(min_calibration_size(0.01) == 99);
}

TEST_CASE("calibrate_multistep examples", "[conformal]") {
  std::mt19937_64 rng(2);
  Matrix one(20, 1);
  for (Eigen::Index i = 0; i < 20; ++i) one(i, 0) = static_cast<double>((i * 7) % 20);
  const ConformalBand b1 = calibrate_multistep({one}, 0.1);
  CHECK(b1.epsilons.size() == 1);
  CHECK(b1.epsilons[0] == critical_epsilon(std::span<const double>(one.data(), 20), 0.1));

  // O=2, m=39: per-column rank 38.
  CHECK(critical_rank(39, 0.1 / 2.0) == 38);
  Matrix two(39, 2);
  std::vector<double> col0(39);
  std::vector<double> col1(39);
  std::iota(col0.begin(), col0.end(), 1.0);
  for (std::size_t i = 0; i < 39; ++i) col1[i] = 0.5 * static_cast<double>(i);
  std::shuffle(col0.begin(), col0.end(), rng);
  std::shuffle(col1.begin(), col1.end(), rng);
  for (Eigen::Index i = 0; i < 39; ++i) {
    two(i, 0) = col0[static_cast<std::size_t>(i)];
    two(i, 1) = col1[static_cast<std::size_t>(i)];
  }
  const ConformalBand b2 = calibrate_multistep({two}, 0.1);
  CHECK(b2.epsilons[0] == *brute_force_epsilon(col0, 38));
  CHECK(b2.epsilons[0] == 38.0);
  CHECK(b2.epsilons[1] == 18.5);
  CHECK(b2.m == 39);
  CHECK(b2.alpha == 0.1);

  CHECK(calibrate_multistep({Matrix::Zero(30, 3)}, 0.1).epsilons == std::vector<double>(3, 0.0));
  CHECK_THROWS_AS(calibrate_multistep({Matrix::Zero(10, 4)}, 0.1), InsufficientCalibrationError);
}

TEST_CASE("decreasing alpha never shrinks a band", "[conformal][property]") {
  std::mt19937_64 rng(7);
  std::exponential_distribution<double> ex(1.0);
  Matrix r(300, 4);
  for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = ex(rng);
  std::vector<double> prev;
  for (double alpha : {0.5, 0.3, 0.2, 0.1, 0.05, 0.02}) {
    const ConformalBand b = calibrate_multistep({r}, alpha);
    if (!prev.empty()) {
      for (std::size_t t = 0; t < 4; ++t) CHECK(b.epsilons[t] >= prev[t]);
    }
    prev = b.epsilons;
  }
}

TEST_CASE("predict_interval and coverage examples", "[conformal]") {
  ConformalBand band{{0.5, 1.0}, 0.1, 20};
  const auto iv = predict_interval(std::vector<double>{1, 2}, band);
  CHECK(iv[0].lo == 0.5);
  CHECK(iv[0].hi == 1.5);
  CHECK(iv[1].lo == 1.0);
  CHECK(iv[1].hi == 3.0);
  const auto point = predict_interval(std::vector<double>{4}, ConformalBand{{0.0}, 0.1, 20});
  CHECK(point[0].lo == 4.0);
  CHECK(point[0].hi == 4.0);
  CHECK_THROWS_AS(predict_interval(std::vector<double>{1}, band), DimensionError);

  Matrix forecasts = Matrix::Zero(2, 2);
  Matrix targets(2, 2);
  targets << 0.2, -0.9, 0.4, 5.0;
  const ConformalBand unit{{1.0, 1.0}, 0.1, 20};
  const CoverageReport r = coverage_metrics(forecasts, targets, unit);
  CHECK(r.ic == 0.75);
  CHECK(r.jc == 0.5);
  CHECK(r.miw == 2.0);
  CHECK(r.n_test == 2);

  // Boundary points count as covered.
  Matrix edge(1, 2);
  edge << 1.0, -1.0;
  CHECK(coverage_metrics(Matrix::Zero(1, 2), edge, unit).jc == 1.0);
  CHECK(mean_interval_width(ConformalBand{{1.0, 3.0}, 0.1, 20}) == 4.0);

  std::vector<std::vector<Interval>> ivs{predict_interval(std::vector<double>{0, 0}, unit),
                                         predict_interval(std::vector<double>{0, 0}, unit)};
  const CoverageReport r2 = coverage_metrics(ivs, targets);
  CHECK(r2.ic == 0.75);
  CHECK(r2.jc == 0.5);
}

TEST_CASE("coverage properties", "[conformal][property]") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial;
    const Eigen::Index O = 1 + trial % 5;
    Matrix f(n, O);
    Matrix y(n, O);
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      f.data()[i] = n01(rng);
      y.data()[i] = n01(rng);
    }
    ConformalBand band;
    for (Eigen::Index t = 0; t < O; ++t) band.epsilons.push_back(std::abs(n01(rng)));
    const CoverageReport r = coverage_metrics(f, y, band);
    CHECK(r.jc <= r.ic);
    CHECK(r.ic <= 1.0);
    CHECK(r.jc >= 0.0);
    // Width depends on the band only.
    CHECK(coverage_metrics(f * 3.0, y.array() + 1.0, band).miw == r.miw);
  }
}

TEST_CASE("split conformal coverage on exchangeable windows", "[conformal][montecarlo]") {
  constexpr double kAlpha = 0.1;
  constexpr int kResamples = 200;
  constexpr Eigen::Index kM = 200;
  constexpr Eigen::Index kTest = 200;
  for (Eigen::Index O : {1, 2, 4}) {
    std::mt19937_64 rng(1000 + static_cast<std::uint64_t>(O));
    std::normal_distribution<double> n01;
    int first_covered = 0;
    double jc_sum = 0.0;
    double ic_sum = 0.0;
    for (int rep = 0; rep < kResamples; ++rep) {
      Matrix cal(kM, O);
      Matrix test(kTest, O);
      for (Eigen::Index i = 0; i < cal.size(); ++i) cal.data()[i] = n01(rng);
      for (Eigen::Index i = 0; i < test.size(); ++i) test.data()[i] = n01(rng);
      // Forecaster predicts 0 everywhere.
      const ConformalBand band = calibrate_multistep(collect_residuals(Matrix::Zero(kM, O), cal), kAlpha);
      const CoverageReport r = coverage_metrics(Matrix::Zero(kTest, O), test, band);
      jc_sum += r.jc;
      ic_sum += r.ic;
      const CoverageReport first = coverage_metrics(Matrix::Zero(1, O), test.topRows(1), band);
      first_covered += first.jc == 1.0 ? 1 : 0;
    }
    const double floor = (1.0 - kAlpha) - 3.0 * std::sqrt(kAlpha * (1.0 - kAlpha) / kResamples);
    INFO("O=" << O << " first-example JC " << first_covered / double(kResamples) << " mean JC "
              << jc_sum / kResamples);
    CHECK(first_covered / static_cast<double>(kResamples) >= floor);
    CHECK(jc_sum / kResamples >= 0.88);
    CHECK(ic_sum / kResamples >= 1.0 - kAlpha);
  }
}

TEST_CASE("wac examples", "[conformal][tos]") {
  CHECK(wac(1.0, 1.0, 0.5) == 0.5);
  CHECK(wac(0.9, 0.99, 2.0 / 3.0) == Catch::Approx(0.465));
  CHECK(wac(0.0, 0.0, 0.3) == 0.0);
  CHECK_THROWS_AS(wac(0.9, 0.9, 1.5), ConfigError);
  CHECK_THROWS_AS(wac(1.2, 0.9, 0.5), ConfigError);
}

TEST_CASE("tos examples", "[conformal][tos]") {
  const std::vector<TosInput> equal{{0.99, 0.9, 3.0}, {0.99, 0.9, 3.0}};
  const auto eq = tos_scores(equal, 2.0 / 3.0, 0.5);
  CHECK(eq[0] == eq[1]);
  CHECK(eq[0] == Catch::Approx(0.5 * 0.465 + 0.25));

  const std::vector<TosInput> two{{0.99, 0.9, 2.0}, {0.99, 0.9, 4.0}};
  const auto z = miw_zscores(two);
  CHECK(z[0] == Catch::Approx(1.0 / std::sqrt(2.0)));
  CHECK(z[1] == Catch::Approx(-1.0 / std::sqrt(2.0)));

  const auto intended = tos_scores(two, 2.0 / 3.0, 0.5);
  CHECK(intended[0] == Catch::Approx(0.2325 + 0.5 * sigmoid(0.7071067811865476)));
  CHECK(intended[1] == Catch::Approx(0.2325 + 0.5 * sigmoid(-0.7071067811865476)));
  CHECK(intended[0] > intended[1]);
  // Scalar check of the sigmoid values themselves.
  CHECK(intended[0] == Catch::Approx(0.2325 + 0.5 * 0.66976155));

  const auto verbatim = tos_scores(two, 2.0 / 3.0, 0.5, TosSign::verbatim);
  CHECK(verbatim[0] == Catch::Approx(intended[1]));
  CHECK(verbatim[0] < verbatim[1]);

  const auto only_wac = tos_scores(two, 2.0 / 3.0, 1.0);
  CHECK(only_wac[0] == Catch::Approx(0.465));
  CHECK(only_wac[1] == Catch::Approx(0.465));

  CHECK_THROWS_AS(tos_scores(std::vector<TosInput>{{1, 1, 1}}, 0.5, 0.5), SizeError);
  CHECK_THROWS_AS(tos_scores(two, 0.5, -0.1), ConfigError);
}

TEST_CASE("tos is translation invariant in MIW and bounded", "[conformal][tos][property]") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TosInput> in(2 + static_cast<std::size_t>(trial % 5));
    for (auto& r : in) {
      r.ic = u(rng);
      r.jc = r.ic * u(rng);
      r.miw = 5.0 * u(rng);
    }
    const double beta = u(rng);
    const double lambda = u(rng);
    const auto base = tos_scores(in, beta, lambda);
    auto shifted = in;
    for (auto& r : shifted) r.miw += 17.25;
    const auto moved = tos_scores(shifted, beta, lambda);
    for (std::size_t i = 0; i < in.size(); ++i) {
      CHECK(std::abs(moved[i] - base[i]) < 1e-9);
      CHECK(base[i] >= 0.0);
      CHECK(base[i] <= 1.0);
    }
  }
}
