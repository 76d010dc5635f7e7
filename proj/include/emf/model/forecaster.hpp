#pragma once

#include "emf/nn/module.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace emf::model {

enum class ModelKind { emforecaster, dlinear, mlp, persistence };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

/// A map from lookback windows [B x L] to forecasts [B x O].
///
/// forward()/backward() are the training path and mutate per-layer caches, so a
/// model is single-writer while training. predict() only reads parameters and is
/// safe to call concurrently on a shared instance.
class Forecaster : public nn::Module {
 public:
  virtual ModelKind kind() const = 0;
  virtual std::size_t lookback() const = 0;
  virtual std::size_t horizon() const = 0;

  /// Architecture fields stored in checkpoint headers.
  virtual nlohmann::json config_json() const = 0;
  virtual std::unique_ptr<Forecaster> clone() const = 0;

  /// Re-imposes parameter constraints after an optimizer step.
  virtual void project_parameters() {}

  /// Batched inference in fixed-size row chunks (results do not depend on the
  /// number of worker threads).
  nn::Matrix predict(const nn::Matrix& inputs) const;
  nn::Matrix apply(const nn::Matrix& inputs) const final { return predict(inputs); }

  std::vector<const nn::Parameter*> const_parameters() const;
  std::vector<nn::Matrix> snapshot() const;
  void restore(const std::vector<nn::Matrix>& values);

 protected:
  virtual nn::Matrix predict_batch(const nn::Matrix& inputs) const = 0;
  void require_lookback(const nn::Matrix& inputs) const;
};

inline constexpr Eigen::Index kPredictChunkRows = 256;

}  // namespace emf::model
