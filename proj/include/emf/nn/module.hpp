#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <random>
#include <string>
#include <vector>

namespace emf::nn {

/// Row-major dense matrix of 64-bit reals. Batches are always rows.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

std::string shape_of(const Matrix& m);

bool all_finite(const Matrix& m);

/// A learnable tensor with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix init);

  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(); }
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

/// Weights ~ Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

/// A differentiable stage. forward() caches what backward() needs;
/// backward() accumulates into Parameter::grad and returns dL/dinput.
/// apply() evaluates without touching any cache.
class Module {
 public:
  virtual ~Module() = default;

  virtual Matrix apply(const Matrix& x) const = 0;
  virtual Matrix forward(const Matrix& x) = 0;
  virtual Matrix backward(const Matrix& grad_out) = 0;
  virtual std::vector<Parameter*> parameters() = 0;

  void zero_grad();
  std::size_t parameter_count();
};

}  // namespace emf::nn
