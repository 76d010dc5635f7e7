#include "emf/analysis/correlation.hpp"

#include "emf/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace emf::analysis {

CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& series, std::size_t common_len) {
  if (series.size() < 2) throw SizeError("correlation matrix needs at least 2 series");
  if (common_len < 3) throw SizeError("common length must be at least 3");
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (series[i].size() < common_len) {
      throw SizeError("series " + std::to_string(i) + " has " + std::to_string(series[i].size()) +
                      " samples, fewer than the common length " + std::to_string(common_len));
    }
  }

  const std::size_t k = series.size();
  const double n = static_cast<double>(common_len);
  std::vector<std::vector<double>> centered(k);
  std::vector<double> norms(k);
  for (std::size_t i = 0; i < k; ++i) {
    double mu = 0.0;
    for (std::size_t t = 0; t < common_len; ++t) mu += series[i][t];
    mu /= n;
    centered[i].resize(common_len);
    double ss = 0.0;
    for (std::size_t t = 0; t < common_len; ++t) {
      centered[i][t] = series[i][t] - mu;
      ss += centered[i][t] * centered[i][t];
    }
    norms[i] = std::sqrt(ss);
  }

  CorrelationMatrix out(k, std::vector<std::optional<double>>(k));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      if (norms[i] == 0.0 || norms[j] == 0.0) continue;
      if (i == j) {
        out[i][i] = 1.0;
        continue;
      }
      double dot = 0.0;
      for (std::size_t t = 0; t < common_len; ++t) dot += centered[i][t] * centered[j][t];
      const double r = std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0);
      out[i][j] = r;
      out[j][i] = r;
    }
  }
  return out;
}

}  // namespace emf::analysis
