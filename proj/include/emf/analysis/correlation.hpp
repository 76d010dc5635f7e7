#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace emf::analysis {

/// Entry (i, j) is nullopt when either series is constant over the window.
using CorrelationMatrix = std::vector<std::vector<std::optional<double>>>;

/// Pearson correlation over the first common_len samples of every pair.
CorrelationMatrix correlation_matrix(const std::vector<std::vector<double>>& series, std::size_t common_len);

}  // namespace emf::analysis
