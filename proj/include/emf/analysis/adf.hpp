#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>

namespace emf::analysis {

/// Significance levels with embedded critical values.
inline constexpr std::array<double, 3> kAdfLevels = {0.01, 0.05, 0.10};

/// Asymptotic Dickey-Fuller critical values for the regression with constant
/// and linear trend, in the order of kAdfLevels.
inline constexpr std::array<double, 3> kAdfTrendCriticalValues = {-3.96, -3.41, -3.12};

struct AdfResult {
  double statistic = 0.0;
  std::size_t lag_order = 0;
  std::size_t n_effective = 0;
  /// reject[i] is true when the unit-root null is rejected at kAdfLevels[i].
  std::array<bool, 3> reject{};

  bool rejects_at(double level) const;
};

/// Default upper bound for lag search: floor(12 * (T/100)^(1/4)).
std::size_t schwert_max_lag(std::size_t T);

/// Augmented Dickey-Fuller test with constant and trend.
///
/// Fits x_t = c + w1*t + w2*x_{t-1} + sum_{i=1..p} phi_i * dx_{t-i} by OLS and
/// returns (w2_hat - 1) / SE(w2_hat). When max_lag is given without fixed_lag,
/// p minimises AIC over 0..max_lag, with every candidate fitted on the common
/// sample that the largest lag allows; the chosen p is then refitted on its full
/// sample. fixed_lag skips the search.
AdfResult adf_test(std::span<const double> x, std::optional<std::size_t> max_lag = std::nullopt,
                   std::optional<std::size_t> fixed_lag = std::nullopt);

}  // namespace emf::analysis
