#pragma once

#include "emf/nn/module.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace emf::conformal {

/// Absolute calibration errors, one row per example and one column per horizon step.
struct CalibrationSet {
  nn::Matrix residuals;  // [m x O]

  std::size_t m() const { return static_cast<std::size_t>(residuals.rows()); }
  std::size_t horizon() const { return static_cast<std::size_t>(residuals.cols()); }
};

CalibrationSet collect_residuals(const nn::Matrix& forecasts, const nn::Matrix& targets);

/// 1-based rank ceil((m+1)(1-alpha)). A relative slack of 1e-9 absorbs the
/// rounding in (1-alpha) so that e.g. m=9, alpha=0.1 yields exactly 9.
std::size_t critical_rank(std::size_t m, double alpha);

/// Smallest m with critical_rank(m, alpha) <= m.
std::size_t min_calibration_size(double alpha);

/// The critical_rank-th smallest residual. Throws InsufficientCalibrationError
/// when that rank exceeds the number of residuals.
double critical_epsilon(std::span<const double> residuals, double alpha);

struct ConformalBand {
  std::vector<double> epsilons;  // one half-width per horizon step
  double alpha = 0.1;
  std::size_t m = 0;
};

/// Per-step critical scores at the Bonferroni level alpha / O.
ConformalBand calibrate_multistep(const CalibrationSet& cal, double alpha);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

std::vector<Interval> predict_interval(std::span<const double> forecast, const ConformalBand& band);

struct CoverageReport {
  double ic = 0.0;
  double jc = 0.0;
  double miw = 0.0;
  std::size_t n_test = 0;
};

/// Containment is closed: lo <= y <= hi.
CoverageReport coverage_metrics(const std::vector<std::vector<Interval>>& intervals, const nn::Matrix& targets);
CoverageReport coverage_metrics(const nn::Matrix& forecasts, const nn::Matrix& targets, const ConformalBand& band);

/// (1/O) sum_t 2 eps_t.
double mean_interval_width(const ConformalBand& band);

/// (beta JC + (1 - beta) IC) / 2, halving included.
double wac(double jc, double ic, double beta);

/// Which way the width term of TOS points. `intended` rewards narrow intervals
/// with 1/(1+e^{-z}); `verbatim` evaluates 1/(1+e^{z}), which favours wide ones.
enum class TosSign { intended, verbatim };

struct TosInput {
  double ic = 0.0;
  double jc = 0.0;
  double miw = 0.0;
};

/// z_i = (mean - miw_i) / sample_std over the k predictors (0 when the std is 0).
std::vector<double> miw_zscores(std::span<const TosInput> inputs);

std::vector<double> tos_scores(std::span<const TosInput> inputs, double beta, double lambda,
                               TosSign sign = TosSign::intended);

}  // namespace emf::conformal
