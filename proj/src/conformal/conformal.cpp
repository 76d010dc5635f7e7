#include "emf/conformal/conformal.hpp"

#include "emf/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace emf::conformal {

namespace {

void require_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

void require_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(what) + " must lie in [0, 1], got " + std::to_string(v));
}

}  // namespace

CalibrationSet collect_residuals(const nn::Matrix& forecasts, const nn::Matrix& targets) {
  if (forecasts.rows() != targets.rows() || forecasts.cols() != targets.cols()) {
    throw DimensionError("collect_residuals: forecasts " + nn::shape_of(forecasts) + " vs targets " +
                         nn::shape_of(targets));
  }
  if (forecasts.rows() == 0) throw SizeError("collect_residuals: no calibration examples");
  if (!nn::all_finite(forecasts) || !nn::all_finite(targets)) {
    throw DimensionError("collect_residuals: non-finite forecast or target");
  }
  return {(targets - forecasts).cwiseAbs()};
}

std::size_t critical_rank(std::size_t m, double alpha) {
  require_alpha(alpha);
  const double x = static_cast<double>(m + 1) * (1.0 - alpha);
  return static_cast<std::size_t>(std::ceil(x - 1e-9 * std::max(1.0, x)));
}

std::size_t min_calibration_size(double alpha) {
  require_alpha(alpha);
  // ceil((m+1)(1-alpha)) <= m first holds near m = 1/alpha - 1.
  auto m = static_cast<std::size_t>(std::max(1.0, std::floor(1.0 / alpha) - 2.0));
  while (critical_rank(m, alpha) > m) ++m;
  return m;
}

double critical_epsilon(std::span<const double> residuals, double alpha) {
  require_alpha(alpha);
  if (residuals.empty()) throw SizeError("critical_epsilon: no residuals");
  const std::size_t m = residuals.size();
  const std::size_t r = critical_rank(m, alpha);
  if (r > m) {
    const std::size_t need = min_calibration_size(alpha);
    std::ostringstream msg;
    msg << "insufficient calibration data: rank " << r << " exceeds m=" << m << "; alpha=" << alpha
        << " needs at least " << need << " calibration examples";
    throw InsufficientCalibrationError(msg.str(), need);
  }
  std::vector<double> sorted(residuals.begin(), residuals.end());
  std::stable_sort(sorted.begin(), sorted.end());
  return sorted[r - 1];
}

ConformalBand calibrate_multistep(const CalibrationSet& cal, double alpha) {
  require_alpha(alpha);
  const std::size_t O = cal.horizon();
  if (O == 0 || cal.m() == 0) throw SizeError("calibrate_multistep: empty calibration set");
  const double step_alpha = alpha / static_cast<double>(O);
  ConformalBand band;
  band.alpha = alpha;
  band.m = cal.m();
  band.epsilons.resize(O);
  std::vector<double> column(cal.m());
  for (std::size_t t = 0; t < O; ++t) {
    for (std::size_t i = 0; i < cal.m(); ++i) {
      column[i] = cal.residuals(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
    }
    try {
      band.epsilons[t] = critical_epsilon(column, step_alpha);
    } catch (const InsufficientCalibrationError& e) {
      std::ostringstream msg;
      msg << "insufficient calibration data for horizon " << O << " at alpha=" << alpha
          << " (per-step level " << step_alpha << "): have m=" << cal.m() << ", need m >= " << e.required_m();
      throw InsufficientCalibrationError(msg.str(), e.required_m());
    }
  }
  return band;
}

std::vector<Interval> predict_interval(std::span<const double> forecast, const ConformalBand& band) {
  if (forecast.size() != band.epsilons.size()) {
    throw DimensionError("predict_interval: forecast length " + std::to_string(forecast.size()) +
                         " vs band length " + std::to_string(band.epsilons.size()));
  }
  std::vector<Interval> out(forecast.size());
  for (std::size_t t = 0; t < forecast.size(); ++t) {
    out[t] = {forecast[t] - band.epsilons[t], forecast[t] + band.epsilons[t]};
  }
  return out;
}

double mean_interval_width(const ConformalBand& band) {
  if (band.epsilons.empty()) return 0.0;
  double sum = 0.0;
  for (double e : band.epsilons) sum += 2.0 * e;
  return sum / static_cast<double>(band.epsilons.size());
}

CoverageReport coverage_metrics(const std::vector<std::vector<Interval>>& intervals, const nn::Matrix& targets) {
  const std::size_t n = intervals.size();
  if (n == 0) throw SizeError("coverage_metrics: no test examples");
  if (static_cast<Eigen::Index>(n) != targets.rows()) {
    throw DimensionError("coverage_metrics: " + std::to_string(n) + " interval rows vs targets " +
                         nn::shape_of(targets));
  }
  const std::size_t O = intervals.front().size();
  if (O == 0 || static_cast<Eigen::Index>(O) != targets.cols()) {
    throw DimensionError("coverage_metrics: horizon mismatch with targets " + nn::shape_of(targets));
  }
  std::size_t inside = 0;
  std::size_t joint = 0;
  double width = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (intervals[i].size() != O) throw DimensionError("coverage_metrics: ragged interval rows");
    bool all = true;
    for (std::size_t t = 0; t < O; ++t) {
      const double y = targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t));
      const bool in = intervals[i][t].lo <= y && y <= intervals[i][t].hi;
      inside += in ? 1 : 0;
      all = all && in;
    }
    joint += all ? 1 : 0;
  }
  for (const Interval& iv : intervals.front()) width += iv.hi - iv.lo;
  CoverageReport r;
  r.n_test = n;
  r.ic = static_cast<double>(inside) / static_cast<double>(n * O);
  r.jc = static_cast<double>(joint) / static_cast<double>(n);
  r.miw = width / static_cast<double>(O);
  return r;
}

CoverageReport coverage_metrics(const nn::Matrix& forecasts, const nn::Matrix& targets, const ConformalBand& band) {
  if (forecasts.rows() != targets.rows() || forecasts.cols() != targets.cols()) {
    throw DimensionError("coverage_metrics: forecasts " + nn::shape_of(forecasts) + " vs targets " +
                         nn::shape_of(targets));
  }
  std::vector<std::vector<Interval>> intervals(static_cast<std::size_t>(forecasts.rows()));
  std::vector<double> row(static_cast<std::size_t>(forecasts.cols()));
  for (Eigen::Index i = 0; i < forecasts.rows(); ++i) {
    for (Eigen::Index t = 0; t < forecasts.cols(); ++t) row[static_cast<std::size_t>(t)] = forecasts(i, t);
    intervals[static_cast<std::size_t>(i)] = predict_interval(row, band);
  }
  CoverageReport r = coverage_metrics(intervals, targets);
  r.miw = mean_interval_width(band);
  return r;
}

double wac(double jc, double ic, double beta) {
  require_unit(beta, "beta");
  require_unit(jc, "JC");
  require_unit(ic, "IC");
  return (beta * jc + (1.0 - beta) * ic) / 2.0;
}

std::vector<double> miw_zscores(std::span<const TosInput> inputs) {
  const std::size_t k = inputs.size();
  if (k < 2) throw SizeError("TOS needs at least 2 predictors to normalise widths, got " + std::to_string(k));
  double mu = 0.0;
  for (const auto& in : inputs) mu += in.miw;
  mu /= static_cast<double>(k);
  double ss = 0.0;
  for (const auto& in : inputs) ss += (in.miw - mu) * (in.miw - mu);
  const double sigma = std::sqrt(ss / static_cast<double>(k - 1));
  std::vector<double> z(k, 0.0);
  if (sigma > 0.0) {
    for (std::size_t i = 0; i < k; ++i) z[i] = (mu - inputs[i].miw) / sigma;
  }
  return z;
}

std::vector<double> tos_scores(std::span<const TosInput> inputs, double beta, double lambda, TosSign sign) {
  require_unit(lambda, "lambda");
  require_unit(beta, "beta");
  for (const auto& in : inputs) {
    if (!std::isfinite(in.miw) || in.miw < 0.0) throw ConfigError("TOS: MIW must be finite and non-negative");
  }
  const std::vector<double> z = miw_zscores(inputs);
  std::vector<double> out(inputs.size());
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const double exponent = sign == TosSign::intended ? -z[i] : z[i];
    const double width_term = 1.0 / (1.0 + std::exp(exponent));
    out[i] = lambda * wac(inputs[i].jc, inputs[i].ic, beta) + (1.0 - lambda) * width_term;
  }
  return out;
}

}  // namespace emf::conformal
