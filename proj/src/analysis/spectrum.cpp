#include "emf/analysis/spectrum.hpp"

#include "emf/error.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <mutex>
#include <numeric>

namespace emf::analysis {

namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

Spectrum fft_magnitudes(std::span<const double> x) {
  const std::size_t T = x.size();
  if (T < 4) throw SizeError("spectrum needs at least 4 samples, got " + std::to_string(T));

  std::vector<double> in(x.begin(), x.end());
  std::vector<std::complex<double>> out(T / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(T), in.data(), reinterpret_cast<fftw_complex*>(out.data()),
                                FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }

  Spectrum spec;
  spec.T = T;
  spec.magnitudes.reserve(out.size());
  spec.periods.reserve(out.size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    spec.magnitudes.push_back(std::abs(out[k]));
    spec.periods.push_back(k == 0 ? std::numeric_limits<double>::infinity()
                                  : static_cast<double>(T) / static_cast<double>(k));
  }
  return spec;
}

std::optional<double> dominant_period(const Spectrum& spec) {
  if (spec.magnitudes.size() < 2) return std::nullopt;
  const double largest = *std::max_element(spec.magnitudes.begin(), spec.magnitudes.end());
  std::size_t best = 1;
  for (std::size_t k = 2; k < spec.magnitudes.size(); ++k) {
    if (spec.magnitudes[k] > spec.magnitudes[best]) best = k;
  }
  const double peak = spec.magnitudes[best];
  if (peak <= 0.0 || peak <= 1e-12 * largest) return std::nullopt;
  return static_cast<double>(spec.T) / static_cast<double>(best);
}

std::vector<double> top_periods(const Spectrum& spec, std::size_t count) {
  if (spec.magnitudes.size() < 2) return {};
  std::vector<std::size_t> ks(spec.magnitudes.size() - 1);
  std::iota(ks.begin(), ks.end(), std::size_t{1});
  std::stable_sort(ks.begin(), ks.end(),
                   [&](std::size_t a, std::size_t b) { return spec.magnitudes[a] > spec.magnitudes[b]; });
  ks.resize(std::min(count, ks.size()));
  std::vector<double> out;
  for (std::size_t k : ks) out.push_back(static_cast<double>(spec.T) / static_cast<double>(k));
  return out;
}

}  // namespace emf::analysis
