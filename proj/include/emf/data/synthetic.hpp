#pragma once

#include "emf/data/pipeline.hpp"

#include <cstdint>
#include <vector>

namespace emf::data {

struct CycleComponent {
  double period = 240.0;  // samples
  double amplitude = 1.0;
};

/// x_t = sum_c a_c sin(2 pi t / p_c) + noise_std * e_t with e_t ~ N(0, 1), t = 0..T-1.
/// The fixture interval is 360 s, so a 240-sample period is one day.
TimeSeries cyclic_fixture(std::size_t length, const std::vector<CycleComponent>& cycles, double noise_std,
                          std::uint64_t seed, std::string label = "daily-cycle");

/// The standard forecasting fixture: one 240-sample cycle plus 0.1 noise.
TimeSeries daily_cycle_fixture(std::size_t length = 20000, std::uint64_t seed = 7);

/// Random walk and white noise used by stationarity checks.
std::vector<double> random_walk(std::size_t length, std::uint64_t seed);
std::vector<double> white_noise(std::size_t length, std::uint64_t seed);

}  // namespace emf::data
