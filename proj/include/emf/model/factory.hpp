#pragma once

#include "emf/baselines/baselines.hpp"
#include "emf/model/emforecaster.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

namespace emf::model {

/// Architecture choice plus per-kind settings. Lookback and horizon are
/// supplied separately and override the values stored in the sub-configs.
struct ArchitectureConfig {
  ModelKind kind = ModelKind::emforecaster;
  EmfConfig emforecaster;
  baselines::DLinearConfig dlinear;
  baselines::MlpConfig mlp;

  nlohmann::json to_json() const;
  static ArchitectureConfig from_json(const nlohmann::json& j);
};

std::unique_ptr<Forecaster> make_forecaster(const ArchitectureConfig& arch, std::size_t lookback,
                                            std::size_t horizon, std::uint64_t seed);

/// Rebuilds an untrained model of the recorded kind/config (used before loading weights).
std::unique_ptr<Forecaster> make_forecaster(ModelKind kind, const nlohmann::json& config);

/// Checkpoint header: {"model_kind", "config", "meta"} plus the tensor directory.
std::vector<std::uint8_t> encode_forecaster(const Forecaster& model, const nlohmann::json& meta = nlohmann::json::object());
void save_forecaster(const std::filesystem::path& path, const Forecaster& model,
                     const nlohmann::json& meta = nlohmann::json::object());

struct LoadedForecaster {
  std::unique_ptr<Forecaster> model;
  nlohmann::json meta;
};

LoadedForecaster decode_forecaster(const std::vector<std::uint8_t>& bytes);
LoadedForecaster load_forecaster(const std::filesystem::path& path);

}  // namespace emf::model
