#include "emf/model/forecaster.hpp"

#include "emf/error.hpp"
#include "emf/parallel.hpp"

namespace emf::model {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::emforecaster: return "emforecaster";
    case ModelKind::dlinear: return "dlinear";
    case ModelKind::mlp: return "mlp";
    case ModelKind::persistence: return "persistence";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "emforecaster") return ModelKind::emforecaster;
  if (name == "dlinear") return ModelKind::dlinear;
  if (name == "mlp") return ModelKind::mlp;
  if (name == "persistence") return ModelKind::persistence;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

void Forecaster::require_lookback(const nn::Matrix& inputs) const {
  if (inputs.cols() != static_cast<Eigen::Index>(lookback())) {
    throw DimensionError(to_string(kind()) + ": input " + nn::shape_of(inputs) + " but lookback is " +
                         std::to_string(lookback()));
  }
}

nn::Matrix Forecaster::predict(const nn::Matrix& inputs) const {
  require_lookback(inputs);
  const Eigen::Index rows = inputs.rows();
  nn::Matrix out(rows, static_cast<Eigen::Index>(horizon()));
  const auto chunks = static_cast<std::size_t>((rows + kPredictChunkRows - 1) / kPredictChunkRows);
  parallel_for(chunks, [&](std::size_t c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kPredictChunkRows;
    const Eigen::Index count = std::min(kPredictChunkRows, rows - begin);
    out.middleRows(begin, count) = predict_batch(inputs.middleRows(begin, count));
  });
  return out;
}

std::vector<const nn::Parameter*> Forecaster::const_parameters() const {
  std::vector<const nn::Parameter*> out;
  for (nn::Parameter* p : const_cast<Forecaster*>(this)->parameters()) out.push_back(p);
  return out;
}

std::vector<nn::Matrix> Forecaster::snapshot() const {
  std::vector<nn::Matrix> out;
  for (const nn::Parameter* p : const_parameters()) out.push_back(p->value);
  return out;
}

void Forecaster::restore(const std::vector<nn::Matrix>& values) {
  auto params = parameters();
  if (params.size() != values.size()) throw DimensionError("restore: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->value.rows() != values[i].rows() || params[i]->value.cols() != values[i].cols()) {
      throw DimensionError("restore: shape mismatch for " + params[i]->name);
    }
    params[i]->value = values[i];
  }
}

}  // namespace emf::model
