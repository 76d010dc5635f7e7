#pragma once

#include "emf/nn/module.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace emf::nn {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators mirroring a fixed parameter list (same order, same shapes).
struct AdamState {
  AdamState() = default;
  AdamState(AdamOptions options, std::span<Parameter* const> params);

  AdamOptions options;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::int64_t step_count = 0;
};

/// Bias-corrected Adam update using each parameter's accumulated grad.
/// Throws TrainingDivergenceError on a non-finite gradient (nothing is modified).
void adam_step(AdamState& state, std::span<Parameter* const> params);

}  // namespace emf::nn
