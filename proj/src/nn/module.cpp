#include "emf/nn/module.hpp"

#include <cmath>
#include <sstream>

namespace emf::nn {

std::string shape_of(const Matrix& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

Parameter::Parameter(std::string name, Matrix init)
    : name(std::move(name)), value(std::move(init)), grad(Matrix::Zero(value.rows(), value.cols())) {}

Matrix fan_in_uniform(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(rows, cols);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  return w;
}

void Module::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::size_t Module::parameter_count() {
  std::size_t n = 0;
  for (Parameter* p : parameters()) n += p->size();
  return n;
}

}  // namespace emf::nn
