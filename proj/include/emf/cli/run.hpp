#pragma once

#include "emf/conformal/conformal.hpp"
#include "emf/data/pipeline.hpp"
#include "emf/model/factory.hpp"
#include "emf/train/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace emf::cli {

inline constexpr const char* kReportSchema = "emf-report/1";
inline constexpr const char* kArtifactVersion = "1.0.0";

/// Everything needed to reproduce a run. JSON form is the config file format
/// and the snapshot embedded in reports and checkpoints.
struct RunConfig {
  std::string data;
  std::string value_column = "value";
  std::optional<double> interval_seconds;
  std::string label;
  std::optional<double> delta;
  std::size_t downsample = 1;
  data::SplitRatios split;
  std::size_t lookback = 336;
  std::size_t horizon = 96;
  model::ArchitectureConfig arch;
  train::TrainConfig train;  // seed is taken from `seeds`
  std::vector<std::uint64_t> seeds = {0};
  double alpha = 0.1;
  double beta = 2.0 / 3.0;
  double lambda = 0.5;
  conformal::TosSign tos_sign = conformal::TosSign::intended;
  std::string report_path;
  std::string checkpoint_path;

  nlohmann::json to_json() const;
  /// Fields absent from j keep the values already in base.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_json(const nlohmann::json& j, RunConfig base);
  static RunConfig from_file(const std::string& path);

  /// Checks everything a modeling run needs; throws ConfigError naming the field.
  void validate() const;
};

/// Ingested, cleaned, split and windowed data.
struct PreparedData {
  data::TimeSeries cleaned;  // after downsampling and outlier interpolation, before z-scoring
  data::SplitSeries split;
  data::WindowDataset train;
  data::WindowDataset val;
  data::WindowDataset test;
  std::size_t raw_length = 0;
  std::size_t outliers_replaced = 0;

  nlohmann::json summary() const;
};

PreparedData prepare_data(const RunConfig& cfg);

struct SeedResult {
  std::uint64_t seed = 0;
  double test_mse = 0.0;
  conformal::ConformalBand band;
  conformal::CoverageReport coverage;
  double wac = 0.0;
  train::TrainHistory history;
};

struct EvalReport {
  std::string model_kind;
  std::string dataset_label;
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  double test_mse_mean = 0.0;
  double test_mse_std = 0.0;
  double ic = 0.0;
  double jc = 0.0;
  double miw = 0.0;
  double wac = 0.0;
  std::optional<double> tos;
  std::size_t calibration_m = 0;
  std::size_t n_test = 0;
  std::vector<SeedResult> per_seed;
  std::size_t param_count = 0;
  nlohmann::json data;
  nlohmann::json config;

  /// run_info carries wall-clock metadata and is the only non-deterministic part.
  nlohmann::json to_json(const nlohmann::json& run_info = nlohmann::json::object()) const;
};

/// Assembles the report from per-seed results (means over seeds; sample std of
/// the test MSE, 0 for a single seed).
EvalReport make_report(const RunConfig& cfg, const PreparedData& prepared, const model::Forecaster& reference,
                       std::vector<SeedResult> per_seed);

/// Test MSE, calibration on the validation windows and coverage on the test windows.
SeedResult assess(const model::Forecaster& model, const PreparedData& prepared, double alpha, double beta,
                  std::uint64_t seed, train::TrainHistory history = {});

using ProgressFn = std::function<void(const std::string&)>;

struct PipelineOutput {
  PreparedData prepared;
  EvalReport report;
  std::vector<std::unique_ptr<model::Forecaster>> models;  // one per seed, same order
};

/// ingest -> interpolate -> split/normalize -> window -> train per seed -> evaluate
/// -> calibrate on validation windows -> coverage on test windows.
PipelineOutput run_pipeline(const RunConfig& cfg, const ProgressFn& progress = {});

/// Checkpoint metadata: resolved config, normalisation and the seed of this model.
nlohmann::json checkpoint_meta(const RunConfig& cfg, const PreparedData& prepared, std::uint64_t seed);

struct TosRow {
  std::size_t rank = 0;  // 1 = best
  std::string source;
  std::string model_kind;
  double ic = 0.0;
  double jc = 0.0;
  double miw = 0.0;
  double wac = 0.0;
  double tos = 0.0;
  double test_mse = 0.0;
};

struct TosTable {
  std::string dataset_label;
  std::size_t lookback = 0;
  std::size_t horizon = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double lambda = 0.0;
  conformal::TosSign sign = conformal::TosSign::intended;
  std::vector<TosRow> rows;  // sorted by rank

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Ranks >= 2 reports by TOS. Reports must agree on dataset label, L, O and alpha.
TosTable tos_compare(const std::vector<nlohmann::json>& reports, const std::vector<std::string>& sources,
                     double beta, double lambda, conformal::TosSign sign = conformal::TosSign::intended);

/// Parses a JSON file, mapping syntax errors to ConfigError.
nlohmann::json read_json_file(const std::string& path);

std::string tos_sign_name(conformal::TosSign sign);
conformal::TosSign parse_tos_sign(const std::string& name);

}  // namespace emf::cli
