#pragma once

#include "emf/nn/module.hpp"

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace emf::nn {

/// Affine map parameters. weight is [out x in]; bias, when present, has length out.
struct DenseParams {
  Matrix weight;
  std::optional<RowVector> bias;
};

/// y = x W^T (+ bias per row). x is [batch x in].
Matrix dense_forward(const DenseParams& p, const Matrix& x);

Matrix relu(const Matrix& x);

/// Row-wise normalization with population variance, then gain/shift.
Matrix layer_norm(const Matrix& x, const RowVector& gain, const RowVector& shift, double eps);

class Dense final : public Module {
 public:
  Dense(std::string name, Eigen::Index in, Eigen::Index out, bool with_bias, Rng& rng);
  Dense(std::string name, DenseParams params);

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Parameter*> parameters() override;

  Eigen::Index in_dim() const { return weight_.value.cols(); }
  Eigen::Index out_dim() const { return weight_.value.rows(); }
  bool has_bias() const { return bias_.has_value(); }
  Parameter& weight() { return weight_; }
  const Parameter& weight() const { return weight_; }
  Parameter* bias() { return bias_ ? &*bias_ : nullptr; }
  const Parameter* bias() const { return bias_ ? &*bias_ : nullptr; }

  Matrix apply(const Matrix& x) const override;

 private:
  Parameter weight_;
  std::optional<Parameter> bias_;
  Matrix input_;
  bool cached_ = false;
};

class ReLU final : public Module {
 public:
  Matrix apply(const Matrix& x) const override { return relu(x); }
  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Parameter*> parameters() override { return {}; }

 private:
  Matrix input_;
  bool cached_ = false;
};

class LayerNorm final : public Module {
 public:
  LayerNorm(std::string name, Eigen::Index dim, double eps = 1e-5);

  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Parameter*> parameters() override { return {&gain_, &shift_}; }

  Matrix apply(const Matrix& x) const override;
  double eps() const { return eps_; }

 private:
  Parameter gain_;
  Parameter shift_;
  double eps_;
  Matrix normalized_;
  Eigen::VectorXd inv_std_;
  bool cached_ = false;
};

/// Layers applied in order; backward runs them in reverse.
class Sequential final : public Module {
 public:
  Sequential() = default;

  Sequential& add(std::unique_ptr<Module> layer);
  std::size_t size() const { return layers_.size(); }
  Module& at(std::size_t i) { return *layers_.at(i); }
  const Module& at(std::size_t i) const { return *layers_.at(i); }

  Matrix apply(const Matrix& x) const override;
  Matrix forward(const Matrix& x) override;
  Matrix backward(const Matrix& grad_out) override;
  std::vector<Parameter*> parameters() override;

 private:
  std::vector<std::unique_ptr<Module>> layers_;
};

}  // namespace emf::nn
