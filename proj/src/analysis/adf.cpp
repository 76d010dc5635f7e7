#include "emf/analysis/adf.hpp"

#include "emf/error.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>

namespace emf::analysis {

namespace {

struct OlsFit {
  double w2 = 0.0;
  double se_w2 = 0.0;
  double rss = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;
};

// Levels regression on observations t = first..T-1 (0-based), p lagged differences.
// The trend regressor is t/T; rescaling it leaves w2 and its standard error unchanged.
OlsFit fit_levels(std::span<const double> x, std::size_t first, std::size_t p) {
  const std::size_t T = x.size();
  const std::size_t n = T - first;
  const std::size_t k = 3 + p;
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t t = first + r;
    const auto row = static_cast<Eigen::Index>(r);
    y(row) = x[t];
    X(row, 0) = 1.0;
    X(row, 1) = static_cast<double>(t) / static_cast<double>(T);
    X(row, 2) = x[t - 1];
    for (std::size_t i = 1; i <= p; ++i) X(row, static_cast<Eigen::Index>(2 + i)) = x[t - i] - x[t - i - 1];
  }

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
  const Eigen::MatrixXd R = qr.matrixQR().topLeftCorner(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k))
                                .triangularView<Eigen::Upper>();
  const Eigen::VectorXd diag = R.diagonal().cwiseAbs();
  if (diag.minCoeff() <= 1e-12 * diag.maxCoeff()) {
    throw RankError("ADF design matrix is rank deficient (lag order " + std::to_string(p) + ")");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  const Eigen::VectorXd resid = y - X * beta;

  OlsFit fit;
  fit.n = n;
  fit.k = k;
  fit.rss = resid.squaredNorm();
  fit.w2 = beta(2);
  const double s2 = fit.rss / static_cast<double>(n - k);
  // (X^T X)^{-1} = R^{-1} R^{-T}; the w2 variance is the squared norm of row 2 of R^{-1}.
  const Eigen::MatrixXd r_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(k),
                                                                       static_cast<Eigen::Index>(k)));
  fit.se_w2 = std::sqrt(s2 * r_inv.row(2).squaredNorm());
  return fit;
}

double aic(const OlsFit& f) {
  const double n = static_cast<double>(f.n);
  return n * std::log(f.rss / n) + 2.0 * static_cast<double>(f.k);
}

}  // namespace

bool AdfResult::rejects_at(double level) const {
  for (std::size_t i = 0; i < kAdfLevels.size(); ++i) {
    if (std::abs(kAdfLevels[i] - level) < 1e-12) return reject[i];
  }
  throw ConfigError("no embedded ADF critical value for level " + std::to_string(level));
}

std::size_t schwert_max_lag(std::size_t T) {
  return static_cast<std::size_t>(std::floor(12.0 * std::pow(static_cast<double>(T) / 100.0, 0.25)));
}

AdfResult adf_test(std::span<const double> x, std::optional<std::size_t> max_lag,
                   std::optional<std::size_t> fixed_lag) {
  const std::size_t T = x.size();
  if (T < 20) throw SizeError("ADF test needs at least 20 observations, got " + std::to_string(T));

  // Largest p with n = T - p - 1 exceeding the 3 + p regressors by a margin.
  const std::size_t feasible = (T - 6) / 2;
  std::size_t p = 0;
  if (fixed_lag) {
    if (*fixed_lag > feasible) {
      throw SizeError("lag order " + std::to_string(*fixed_lag) + " too large for " + std::to_string(T) +
                      " observations");
    }
    p = *fixed_lag;
  } else {
    const std::size_t upper = std::min(max_lag.value_or(schwert_max_lag(T)), feasible);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t lag = 0; lag <= upper; ++lag) {
      const double score = aic(fit_levels(x, upper + 1, lag));
      if (score < best) {
        best = score;
        p = lag;
      }
    }
  }

  const OlsFit fit = fit_levels(x, p + 1, p);
  AdfResult result;
  result.lag_order = p;
  result.n_effective = fit.n;
  result.statistic = (fit.w2 - 1.0) / fit.se_w2;
  for (std::size_t i = 0; i < kAdfLevels.size(); ++i) {
    result.reject[i] = result.statistic < kAdfTrendCriticalValues[i];
  }
  return result;
}

}  // namespace emf::analysis
