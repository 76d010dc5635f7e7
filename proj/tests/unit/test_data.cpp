#include <catch2/catch_amalgamated.hpp>

#include "emf/data/pipeline.hpp"
#include "emf/data/synthetic.hpp"
#include "emf/error.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace emf;
using namespace emf::data;
using Catch::Approx;

namespace {

TimeSeries parse(const std::string& text, LoadOptions opts = {}) {
  std::istringstream in(text);
  return parse_series(in, opts, "test.csv");
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

// Scalar reference for the outlier rule, written independently of the library.
std::vector<double> reference_interpolate(const std::vector<double>& x, double delta) {
  std::vector<double> y = x;
  const std::size_t n = x.size();
  for (std::size_t t = 0; t < n; ++t) {
    if (!(x[t] > delta)) continue;
    if (n == 1) continue;
    if (t == 0) {
      y[t] = x[1];
    } else if (t == n - 1) {
      y[t] = x[n - 2];
    } else {
      y[t] = 0.5 * (x[t - 1] + x[t + 1]);
    }
  }
  return y;
}

}  // namespace

TEST_CASE("load_series parses values in file order", "[data][load]") {
  const auto s = parse(
      "timestamp,value\n"
      "2024-01-01T00:00:00Z,1.0\n"
      "2024-01-01T00:06:00Z,2.0\n"
      "2024-01-01T00:12:00Z,3.0\n");
  REQUIRE(s.size() == 3);
  CHECK(s.values == std::vector<double>{1.0, 2.0, 3.0});
  CHECK(s.sample_interval == 360.0);
}

TEST_CASE("load_series metadata and options", "[data][load]") {
  const auto s = parse("# interval_seconds: 60\n# label: site-a\nvalue\n0.5\n# comment\n0.7\n");
  CHECK(s.values == std::vector<double>{0.5, 0.7});
  CHECK(s.sample_interval == 60.0);
  CHECK(s.origin_label == "site-a");

  LoadOptions opts;
  opts.value_column = "field";
  opts.interval_seconds = 5.0;
  const auto t = parse("# interval_seconds: 60\nfield,other\n1,9\n2,8\n", opts);
  CHECK(t.values == std::vector<double>{1.0, 2.0});
  CHECK(t.sample_interval == 5.0);
}

TEST_CASE("load_series errors", "[data][load]") {
  const std::string bad = error_of("# interval_seconds: 1\nvalue\n1.0\nabc\n3.0\n");
  CHECK(bad.find("test.csv:4") != std::string::npos);
  CHECK(bad.find("abc") != std::string::npos);

  CHECK_THROWS_AS(parse("timestamp,value\n2024-01-01T00:06:00Z,1\n2024-01-01T00:00:00Z,2\n"), ParseError);
  CHECK(error_of("timestamp,value\n2024-01-01T00:06:00Z,1\n2024-01-01T00:00:00Z,2\n").find("strictly increasing") !=
        std::string::npos);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("value\n"), ParseError);
  CHECK_THROWS_AS(parse("other\n1\n"), ParseError);
  CHECK_THROWS_AS(parse("value\n1\n2\n"), ConfigError);
  CHECK_THROWS_AS(load_series("/nonexistent/file.csv"), ParseError);
}

TEST_CASE("RFC 3339 timestamps", "[data][load]") {
  CHECK(parse_rfc3339("1970-01-01T00:00:00Z") == 0.0);
  CHECK(parse_rfc3339("1970-01-02T00:00:00Z") == 86400.0);
  CHECK(parse_rfc3339("2024-03-01T12:00:00+01:00") == parse_rfc3339("2024-03-01T11:00:00Z"));
  CHECK(parse_rfc3339("2024-03-01T12:00:00.5Z") - parse_rfc3339("2024-03-01T12:00:00Z") == Approx(0.5));
  CHECK_THROWS_AS(parse_rfc3339("2024-03-01 12:00"), ParseError);
  CHECK_THROWS_AS(parse_rfc3339("2024-03-01T12:00:00"), ParseError);
  CHECK_THROWS_AS(parse_rfc3339("2024-02-30T12:00:00Z"), ParseError);
}

TEST_CASE("write_series round trips exactly", "[data][load]") {
  const TimeSeries s = daily_cycle_fixture(500, 3);
  std::ostringstream out;
  write_series(out, s);
  const TimeSeries back = parse(out.str());
  CHECK(back.values == s.values);
  CHECK(back.sample_interval == s.sample_interval);
  CHECK(back.origin_label == s.origin_label);
}

TEST_CASE("interpolate_outliers examples", "[data][outliers]") {
  auto run = [](std::vector<double> v) {
    std::size_t n = 0;
    auto out = interpolate_outliers(make_series(std::move(v), 1.0), 50.0, &n).values;
    return std::make_pair(out, n);
  };
  CHECK(run({1, 100, 1}).first == std::vector<double>{1, 1, 1});
  CHECK(run({1, 2, 3}).first == std::vector<double>{1, 2, 3});
  CHECK(run({1, 2, 3}).second == 0);
  CHECK(run({100, 1, 1}).first == std::vector<double>{1, 1, 1});
  CHECK(run({1, 1, 100}).first == std::vector<double>{1, 1, 1});
  // Exactly at the threshold is not an outlier.
  CHECK(run({1, 50, 1}).first == std::vector<double>{1, 50, 1});
  // Neighbours are the original values, even when they are outliers too.
  CHECK(run({1, 100, 200, 3}).first == std::vector<double>{1, 100.5, 51.5, 3});
}

TEST_CASE("interpolate_outliers matches a scalar reference", "[data][outliers][property]") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::bernoulli_distribution spike(0.05);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(200);
    for (double& v : x) v = spike(rng) ? 100.0 + u(rng) : u(rng);
    const auto got = interpolate_outliers(make_series(x, 1.0), 50.0).values;
    CHECK(got == reference_interpolate(x, 50.0));
    // Isolated spikes leave nothing above delta, so a second pass is a no-op.
    bool isolated = true;
    for (std::size_t t = 1; t < x.size(); ++t) isolated = isolated && !(x[t] > 50.0 && x[t - 1] > 50.0);
    if (isolated) CHECK(interpolate_outliers(make_series(got, 1.0), 50.0).values == got);
  }
}

TEST_CASE("split_and_normalize examples", "[data][split]") {
  std::vector<double> v(10);
  for (int i = 0; i < 10; ++i) v[static_cast<std::size_t>(i)] = i;
  const SplitSeries s = split_and_normalize(make_series(v, 1.0));
  CHECK(s.train.size() == 7);
  CHECK(s.val.size() == 1);
  CHECK(s.test.size() == 2);
  CHECK(s.train_mean == Approx(3.0));
  CHECK(s.train_std == Approx(std::sqrt(28.0 / 6.0)));
  CHECK(s.test.values.back() == Approx((9.0 - 3.0) / std::sqrt(28.0 / 6.0)));

  CHECK_THROWS_AS(split_and_normalize(make_series(std::vector<double>(20, 4.2), 1.0)), DegenerateSeriesError);
  CHECK_THROWS_AS(split_and_normalize(make_series(std::vector<double>(9, 1.0), 1.0)), SizeError);
  CHECK_THROWS_AS(split_and_normalize(make_series(v, 1.0), {0.7, 0.2, 0.2}), ConfigError);
}

TEST_CASE("train segment [1,2,3] normalises to [-1,0,1]", "[data][split]") {
  // 3 of 10 samples in train: ratios 0.3/0.3/0.4.
  const SplitSeries s = split_and_normalize(make_series({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 1.0), {0.3, 0.3, 0.4});
  CHECK(s.train_mean == Approx(2.0));
  CHECK(s.train_std == Approx(1.0));
  CHECK(s.train.values[0] == Approx(-1.0));
  CHECK(s.train.values[1] == Approx(0.0).margin(1e-15));
  CHECK(s.train.values[2] == Approx(1.0));
}

TEST_CASE("split segments partition the series and train is standardised", "[data][split][property]") {
  for (std::size_t T : {10u, 11u, 57u, 1000u, 1234u}) {
    const TimeSeries x = daily_cycle_fixture(T, T);
    const SplitSeries s = split_and_normalize(x);
    CHECK(s.train.size() + s.val.size() + s.test.size() == T);
    CHECK(std::abs(static_cast<double>(s.train.size()) - 0.7 * T) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.val.size()) - 0.1 * T) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.test.size()) - 0.2 * T) <= 1.0);
    // Contiguous, ordered slices: undoing the z-score recovers the source in order.
    std::vector<double> joined;
    for (const auto* seg : {&s.train, &s.val, &s.test}) {
      for (double v : seg->values) joined.push_back(v * s.train_std + s.train_mean);
    }
    for (std::size_t i = 0; i < T; ++i) CHECK(joined[i] == Approx(x.values[i]).margin(1e-12));
    CHECK(std::abs(mean(s.train.values)) < 1e-10);
    CHECK(std::abs(sample_std(s.train.values) - 1.0) < 1e-10);
  }
}

TEST_CASE("make_windows examples", "[data][windows]") {
  std::vector<double> seg(10);
  for (int i = 0; i < 10; ++i) seg[static_cast<std::size_t>(i)] = i + 1;
  const WindowDataset w = make_windows(seg, 3, 2);
  REQUIRE(w.size() == 6);
  CHECK(w.inputs.row(0) == Eigen::RowVector3d(1, 2, 3));
  CHECK(w.targets.row(0) == Eigen::RowVector2d(4, 5));

  CHECK(make_windows(std::vector<double>(5, 0.0), 3, 2).size() == 1);
  CHECK_THROWS_AS(make_windows(std::vector<double>(4, 0.0), 3, 2), SizeError);
  try {
    make_windows(std::vector<double>(4, 0.0), 3, 2);
  } catch (const SizeError& e) {
    CHECK(std::string(e.what()).find('5') != std::string::npos);
  }
}

TEST_CASE("windows are complete, ordered continuations", "[data][windows][property]") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  for (std::size_t len : {7u, 30u, 200u}) {
    std::vector<double> seg(len);
    for (double& v : seg) v = n01(rng);
    for (std::size_t L : {1u, 3u, 5u}) {
      for (std::size_t O : {1u, 2u}) {
        const WindowDataset w = make_windows(seg, L, O);
        REQUIRE(w.size() == len - L - O + 1);
        for (std::size_t i = 0; i < w.size(); ++i) {
          for (std::size_t j = 0; j < L; ++j) CHECK(w.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == seg[i + j]);
          for (std::size_t j = 0; j < O; ++j) CHECK(w.targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == seg[i + L + j]);
        }
      }
    }
  }
}

TEST_CASE("downsample examples", "[data][downsample]") {
  const TimeSeries s = make_series({1, 2, 3, 4, 5, 6}, 360.0);
  const TimeSeries d = downsample(s, 5);
  CHECK(d.values == std::vector<double>{3.0});
  CHECK(d.sample_interval == 1800.0);
  CHECK(downsample(s, 1).values == s.values);
  CHECK(downsample(make_series({2, 4}, 1.0), 2).values == std::vector<double>{3.0});
  CHECK_THROWS_AS(downsample(s, 7), SizeError);
  CHECK_THROWS_AS(downsample(s, 0), ConfigError);
}

TEST_CASE("difference examples and cumulative-sum round trip", "[data][difference]") {
  CHECK(difference(make_series({1, 3, 6}, 1.0)).values == std::vector<double>{2, 3});
  CHECK(difference(make_series(std::vector<double>(5, 2.5), 1.0)).values == std::vector<double>(4, 0.0));
  CHECK_THROWS_AS(difference(make_series({1.0}, 1.0)), SizeError);

  const std::vector<double> walk = random_walk(500, 9);
  const auto inc = difference(make_series(walk, 1.0)).values;
  double acc = walk.front();
  for (std::size_t t = 0; t < inc.size(); ++t) {
    acc += inc[t];
    CHECK(std::abs(acc - walk[t + 1]) < 1e-12 * std::max(1.0, std::abs(walk[t + 1])));
  }
}

TEST_CASE("make_series enforces invariants", "[data]") {
  CHECK_THROWS_AS(make_series({}, 1.0), SizeError);
  CHECK_THROWS_AS(make_series({1.0, std::nan("")}, 1.0), ParseError);
  CHECK_THROWS_AS(make_series({1.0}, 0.0), ConfigError);
}
