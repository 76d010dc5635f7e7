#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace emf::analysis {

/// |X_k| for the non-negative frequencies k = 0..floor(T/2).
struct Spectrum {
  std::vector<double> magnitudes;
  std::vector<double> periods;  // T/k samples per cycle; +inf at k = 0
  std::size_t T = 0;
};

Spectrum fft_magnitudes(std::span<const double> x);

/// T/k* with k* = argmax_{k>=1} |X_k|, ties toward the smaller k.
/// nullopt when every k >= 1 magnitude is zero (relative to the largest magnitude).
std::optional<double> dominant_period(const Spectrum& spec);

/// Periods of the `count` largest magnitudes over k >= 1, strongest first.
std::vector<double> top_periods(const Spectrum& spec, std::size_t count);

}  // namespace emf::analysis
