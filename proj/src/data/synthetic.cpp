#include "emf/data/synthetic.hpp"

#include "emf/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace emf::data {

TimeSeries cyclic_fixture(std::size_t length, const std::vector<CycleComponent>& cycles, double noise_std,
                          std::uint64_t seed, std::string label) {
  if (length == 0) throw SizeError("fixture length must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> values(length);
  for (std::size_t t = 0; t < length; ++t) {
    double v = 0.0;
    for (const auto& c : cycles) v += c.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / c.period);
    values[t] = v + noise_std * noise(rng);
  }
  return make_series(std::move(values), 360.0, std::move(label));
}

TimeSeries daily_cycle_fixture(std::size_t length, std::uint64_t seed) {
  return cyclic_fixture(length, {{240.0, 1.0}}, 0.1, seed);
}

std::vector<double> random_walk(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<double> x(length);
  double level = 0.0;
  for (auto& v : x) {
    level += step(rng);
    v = level;
  }
  return x;
}

std::vector<double> white_noise(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> e(0.0, 1.0);
  std::vector<double> x(length);
  for (auto& v : x) v = e(rng);
  return x;
}

}  // namespace emf::data
