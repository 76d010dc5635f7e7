#pragma once

#include "emf/nn/module.hpp"

#include <cstddef>
#include <string>

namespace emf::nn {

/// Mean of squared errors over every entry. When grad is non-null it receives dLoss/dpred.
double mse_loss(const Matrix& pred, const Matrix& target, Matrix* grad = nullptr);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

/// Below this magnitude the finite-difference reference is treated as zero
/// and the discrepancy is measured in absolute terms.
inline constexpr double kGradientCheckFloor = 1e-6;

/// Compares reverse-mode gradients of the MSE loss against central differences,
/// one parameter entry at a time. Relative error is |analytic - numeric| /
/// max(|numeric|, kGradientCheckFloor).
GradientCheckResult gradient_check(Module& net, const Matrix& input, const Matrix& target,
                                   double h = 1e-5);

/// Same comparison for dLoss/dinput.
double input_gradient_check(Module& net, const Matrix& input, const Matrix& target, double h = 1e-5);

}  // namespace emf::nn
