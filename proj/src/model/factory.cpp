#include "emf/model/factory.hpp"

#include "emf/error.hpp"
#include "emf/nn/checkpoint.hpp"


namespace emf::model {

nlohmann::json ArchitectureConfig::to_json() const {
  nlohmann::json j{{"model", to_string(kind)}};
  switch (kind) {
    case ModelKind::emforecaster: j["emforecaster"] = emforecaster.to_json(); break;
    case ModelKind::dlinear: j["dlinear"] = dlinear.to_json(); break;
    case ModelKind::mlp: j["mlp"] = mlp.to_json(); break;
    case ModelKind::persistence: break;
  }
  return j;
}

ArchitectureConfig ArchitectureConfig::from_json(const nlohmann::json& j) {
  ArchitectureConfig a;
  if (j.contains("model")) a.kind = parse_model_kind(j.at("model").get<std::string>());
  if (j.contains("emforecaster")) a.emforecaster = EmfConfig::from_json(j.at("emforecaster"));
  if (j.contains("dlinear")) a.dlinear = baselines::DLinearConfig::from_json(j.at("dlinear"));
  if (j.contains("mlp")) a.mlp = baselines::MlpConfig::from_json(j.at("mlp"));
  return a;
}

std::unique_ptr<Forecaster> make_forecaster(const ArchitectureConfig& arch, std::size_t lookback,
                                            std::size_t horizon, std::uint64_t seed) {
  switch (arch.kind) {
    case ModelKind::emforecaster: {
      EmfConfig c = arch.emforecaster;
      c.lookback = lookback;
      c.horizon = horizon;
      return std::make_unique<EMForecaster>(c, seed);
    }
    case ModelKind::dlinear: {
      baselines::DLinearConfig c = arch.dlinear;
      c.lookback = lookback;
      c.horizon = horizon;
      return std::make_unique<baselines::DLinearModel>(c, seed);
    }
    case ModelKind::mlp: {
      baselines::MlpConfig c = arch.mlp;
      c.lookback = lookback;
      c.horizon = horizon;
      return std::make_unique<baselines::MlpModel>(c, seed);
    }
    case ModelKind::persistence:
      return std::make_unique<baselines::PersistenceForecaster>(lookback, horizon);
  }
  throw StateError("make_forecaster: unhandled model kind");
}

std::unique_ptr<Forecaster> make_forecaster(ModelKind kind, const nlohmann::json& config) {
  ArchitectureConfig arch;
  arch.kind = kind;
  const auto lookback = config.at("lookback").get<std::size_t>();
  const auto horizon = config.at("horizon").get<std::size_t>();
  switch (kind) {
    case ModelKind::emforecaster: arch.emforecaster = EmfConfig::from_json(config); break;
    case ModelKind::dlinear: arch.dlinear = baselines::DLinearConfig::from_json(config); break;
    case ModelKind::mlp: arch.mlp = baselines::MlpConfig::from_json(config); break;
    case ModelKind::persistence: break;
  }
  return make_forecaster(arch, lookback, horizon, 0);
}

namespace {

nlohmann::json header_for(const Forecaster& model, const nlohmann::json& meta) {
  return {{"model_kind", to_string(model.kind())}, {"config", model.config_json()}, {"meta", meta}};
}

LoadedForecaster rebuild(const nn::CheckpointData& data) {
  const auto& h = data.header;
  if (!h.contains("model_kind") || !h.contains("config")) {
    throw CheckpointError("checkpoint header lacks model_kind/config");
  }
  LoadedForecaster out;
  try {
    out.model = make_forecaster(parse_model_kind(h.at("model_kind").get<std::string>()), h.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint config is malformed: ") + e.what());
  }
  for (nn::Parameter* p : out.model->parameters()) {
    auto it = data.tensors.find(p->name);
    if (it == data.tensors.end()) throw CheckpointError("checkpoint is missing tensor '" + p->name + "'");
    if (it->second.rows() != p->value.rows() || it->second.cols() != p->value.cols()) {
      throw CheckpointError("checkpoint tensor '" + p->name + "' has shape " + nn::shape_of(it->second) +
                            ", model expects " + nn::shape_of(p->value));
    }
    p->value = it->second;
  }
  if (data.tensors.size() != out.model->parameters().size()) {
    throw CheckpointError("checkpoint holds tensors the model does not define");
  }
  out.meta = h.value("meta", nlohmann::json::object());
  return out;
}

}  // namespace

std::vector<std::uint8_t> encode_forecaster(const Forecaster& model, const nlohmann::json& meta) {
  return nn::encode_checkpoint(header_for(model, meta), model.const_parameters());
}

void save_forecaster(const std::filesystem::path& path, const Forecaster& model, const nlohmann::json& meta) {
  nn::save_checkpoint(path, header_for(model, meta), model.const_parameters());
}

LoadedForecaster decode_forecaster(const std::vector<std::uint8_t>& bytes) {
  return rebuild(nn::decode_checkpoint(bytes));
}

LoadedForecaster load_forecaster(const std::filesystem::path& path) { return rebuild(nn::load_checkpoint(path)); }

}  // namespace emf::model
