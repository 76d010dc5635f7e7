#include "emf/nn/layers.hpp"

#include "emf/error.hpp"

#include <cmath>

namespace emf::nn {

namespace {

void require_cached(bool cached, const char* layer) {
  if (!cached) throw StateError(std::string(layer) + ": backward called before forward");
}

void require_cols(const Matrix& x, Eigen::Index expected, const std::string& what) {
  if (x.cols() != expected) {
    throw DimensionError(what + ": input " + shape_of(x) + " does not match expected width " +
                         std::to_string(expected));
  }
}

}  // namespace

Matrix dense_forward(const DenseParams& p, const Matrix& x) {
  if (x.cols() != p.weight.cols()) {
    throw DimensionError("dense_forward: input " + shape_of(x) + " incompatible with weight " +
                         shape_of(p.weight));
  }
  Matrix y = x * p.weight.transpose();
  if (p.bias) {
    if (p.bias->size() != p.weight.rows()) {
      throw DimensionError("dense_forward: bias length " + std::to_string(p.bias->size()) +
                           " does not match weight " + shape_of(p.weight));
    }
    y.rowwise() += *p.bias;
  }
  return y;
}

Matrix relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix layer_norm(const Matrix& x, const RowVector& gain, const RowVector& shift, double eps) {
  if (gain.size() != x.cols() || shift.size() != x.cols()) {
    throw DimensionError("layer_norm: input " + shape_of(x) + " with gain/shift of length " +
                         std::to_string(gain.size()) + "/" + std::to_string(shift.size()));
  }
  Matrix y(x.rows(), x.cols());
  const double n = static_cast<double>(x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / n;
    const double var = (x.row(r).array() - mean).square().sum() / n;
    const double inv = 1.0 / std::sqrt(var + eps);
    y.row(r) = ((x.row(r).array() - mean) * inv * gain.array() + shift.array()).matrix();
  }
  return y;
}

// ---------------------------------------------------------------------------

Dense::Dense(std::string name, Eigen::Index in, Eigen::Index out, bool with_bias, Rng& rng)
    : weight_(name + ".weight", fan_in_uniform(out, in, in, rng)) {
  if (with_bias) bias_.emplace(name + ".bias", Matrix::Zero(1, out));
}

Dense::Dense(std::string name, DenseParams params) : weight_(name + ".weight", std::move(params.weight)) {
  if (params.bias) {
    if (params.bias->size() != weight_.value.rows()) {
      throw DimensionError("Dense: bias length does not match weight " + shape_of(weight_.value));
    }
    bias_.emplace(name + ".bias", Matrix(*params.bias));
  }
}

Matrix Dense::apply(const Matrix& x) const {
  require_cols(x, weight_.value.cols(), weight_.name);
  Matrix y(x.rows(), weight_.value.rows());
  y.noalias() = x * weight_.value.transpose();
  if (bias_) y.rowwise() += bias_->value.row(0);
  return y;
}

Matrix Dense::forward(const Matrix& x) {
  Matrix y = apply(x);
  input_ = x;
  cached_ = true;
  return y;
}

Matrix Dense::backward(const Matrix& grad_out) {
  require_cached(cached_, "Dense");
  if (grad_out.rows() != input_.rows() || grad_out.cols() != weight_.value.rows()) {
    throw DimensionError(weight_.name + ": upstream gradient " + shape_of(grad_out) +
                         " does not match output shape");
  }
  weight_.grad.noalias() += grad_out.transpose() * input_;
  if (bias_) bias_->grad += grad_out.colwise().sum();
  Matrix grad_in(grad_out.rows(), weight_.value.cols());
  grad_in.noalias() = grad_out * weight_.value;
  return grad_in;
}

std::vector<Parameter*> Dense::parameters() {
  std::vector<Parameter*> out{&weight_};
  if (bias_) out.push_back(&*bias_);
  return out;
}

// ---------------------------------------------------------------------------

Matrix ReLU::forward(const Matrix& x) {
  input_ = x;
  cached_ = true;
  return relu(x);
}

Matrix ReLU::backward(const Matrix& grad_out) {
  require_cached(cached_, "ReLU");
  return (input_.array() > 0.0).select(grad_out, 0.0);
}

// ---------------------------------------------------------------------------

LayerNorm::LayerNorm(std::string name, Eigen::Index dim, double eps)
    : gain_(name + ".gain", Matrix::Ones(1, dim)), shift_(name + ".shift", Matrix::Zero(1, dim)), eps_(eps) {}

Matrix LayerNorm::apply(const Matrix& x) const {
  return layer_norm(x, gain_.value.row(0), shift_.value.row(0), eps_);
}

Matrix LayerNorm::forward(const Matrix& x) {
  require_cols(x, gain_.value.cols(), gain_.name);
  const Eigen::Index rows = x.rows();
  const double n = static_cast<double>(x.cols());
  normalized_.resize(rows, x.cols());
  inv_std_.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mean = x.row(r).sum() / n;
    const double var = (x.row(r).array() - mean).square().sum() / n;
    inv_std_(r) = 1.0 / std::sqrt(var + eps_);
    normalized_.row(r) = (x.row(r).array() - mean) * inv_std_(r);
  }
  cached_ = true;
  Matrix y = normalized_;
  y.array().rowwise() *= gain_.value.row(0).array();
  y.rowwise() += shift_.value.row(0);
  return y;
}

Matrix LayerNorm::backward(const Matrix& grad_out) {
  require_cached(cached_, "LayerNorm");
  gain_.grad += (grad_out.array() * normalized_.array()).colwise().sum().matrix();
  shift_.grad += grad_out.colwise().sum();

  const double n = static_cast<double>(grad_out.cols());
  Matrix grad_in(grad_out.rows(), grad_out.cols());
  for (Eigen::Index r = 0; r < grad_out.rows(); ++r) {
    const Eigen::ArrayXd dxhat = (grad_out.row(r).array() * gain_.value.row(0).array()).transpose();
    const Eigen::ArrayXd xhat = normalized_.row(r).array().transpose();
    const double mean_d = dxhat.sum() / n;
    const double mean_dx = (dxhat * xhat).sum() / n;
    grad_in.row(r) = (inv_std_(r) * (dxhat - mean_d - xhat * mean_dx)).transpose();
  }
  return grad_in;
}

// ---------------------------------------------------------------------------

Sequential& Sequential::add(std::unique_ptr<Module> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Matrix Sequential::apply(const Matrix& x) const {
  Matrix h = x;
  for (const auto& layer : layers_) h = layer->apply(h);
  return h;
}

Matrix Sequential::forward(const Matrix& x) {
  Matrix h = x;
  for (auto& layer : layers_) h = layer->forward(h);
  return h;
}

Matrix Sequential::backward(const Matrix& grad_out) {
  Matrix g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<Parameter*> Sequential::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

}  // namespace emf::nn
