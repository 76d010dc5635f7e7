#include "emf/nn/adam.hpp"

#include "emf/error.hpp"

#include <cmath>

namespace emf::nn {

AdamState::AdamState(AdamOptions opts, std::span<Parameter* const> params) : options(opts) {
  m.reserve(params.size());
  v.reserve(params.size());
  for (const Parameter* p : params) {
    m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void adam_step(AdamState& state, std::span<Parameter* const> params) {
  if (params.size() != state.m.size()) {
    throw DimensionError("adam_step: optimizer tracks " + std::to_string(state.m.size()) +
                         " tensors but received " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.rows() != state.m[i].rows() || p.grad.cols() != state.m[i].cols()) {
      throw DimensionError("adam_step: gradient " + shape_of(p.grad) + " for " + p.name +
                           " does not match optimizer state " + shape_of(state.m[i]));
    }
    if (!p.grad.allFinite()) {
      throw TrainingDivergenceError("adam_step: non-finite gradient in " + p.name, 0);
    }
  }

  const AdamOptions& o = state.options;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = p.grad.array();
    m = o.beta1 * m + (1.0 - o.beta1) * g;
    v = o.beta2 * v + (1.0 - o.beta2) * g.square();
    p.value.array() -= o.lr * (m / correction1) / ((v / correction2).sqrt() + o.eps);
  }
}

}  // namespace emf::nn
