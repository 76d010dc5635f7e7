#include "emf/nn/gradient_check.hpp"

#include "emf/error.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace emf::nn {

double mse_loss(const Matrix& pred, const Matrix& target, Matrix* grad) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw DimensionError("mse_loss: prediction " + shape_of(pred) + " vs target " + shape_of(target));
  }
  const double count = static_cast<double>(pred.size());
  const Matrix diff = pred - target;
  if (grad != nullptr) *grad = diff * (2.0 / count);
  return diff.squaredNorm() / count;
}

namespace {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(std::abs(numeric), kGradientCheckFloor);
}

double loss_at(Module& net, const Matrix& input, const Matrix& target) {
  return mse_loss(net.forward(input), target);
}

}  // namespace

GradientCheckResult gradient_check(Module& net, const Matrix& input, const Matrix& target, double h) {
  net.zero_grad();
  Matrix grad_out;
  mse_loss(net.forward(input), target, &grad_out);
  net.backward(grad_out);

  std::vector<Parameter*> params = net.parameters();
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  GradientCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      double& w = p.value.data()[i];
      const double saved = w;
      w = saved + h;
      const double up = loss_at(net, input, target);
      w = saved - h;
      const double down = loss_at(net, input, target);
      w = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[k].data()[i], numeric);
      ++result.checked;
      if (err > result.max_relative_error || result.checked == 1) {
        result.max_relative_error = err;
        result.worst_parameter = p.name;
        result.worst_index = static_cast<std::size_t>(i);
      }
    }
  }
  return result;
}

double input_gradient_check(Module& net, const Matrix& input, const Matrix& target, double h) {
  net.zero_grad();
  Matrix grad_out;
  mse_loss(net.forward(input), target, &grad_out);
  const Matrix analytic = net.backward(grad_out);

  Matrix probe = input;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < probe.size(); ++i) {
    const double saved = probe.data()[i];
    probe.data()[i] = saved + h;
    const double up = loss_at(net, probe, target);
    probe.data()[i] = saved - h;
    const double down = loss_at(net, probe, target);
    probe.data()[i] = saved;
    worst = std::max(worst, relative_error(analytic.data()[i], (up - down) / (2.0 * h)));
  }
  return worst;
}

}  // namespace emf::nn
