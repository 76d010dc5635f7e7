#include "emf/cli/run.hpp"

#include "emf/error.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace emf::cli {

namespace {

template <class F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError(msg);
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config field '") + key + "' has the wrong type");
  }
}

template <class T>
void read_optional(const nlohmann::json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) {
    out.reset();
    return;
  }
  T v{};
  read_field(j, key, v);
  out = v;
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mu = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

double mean_of(const std::vector<double>& xs) {
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

std::string tos_sign_name(conformal::TosSign sign) {
  return sign == conformal::TosSign::intended ? "intended" : "verbatim";
}

conformal::TosSign parse_tos_sign(const std::string& name) {
  if (name == "intended") return conformal::TosSign::intended;
  if (name == "verbatim") return conformal::TosSign::verbatim;
  throw ConfigError("tos_sign must be 'intended' or 'verbatim', got '" + name + "'");
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------

nlohmann::json RunConfig::to_json() const {
  model::ArchitectureConfig a = arch;
  a.emforecaster.lookback = a.dlinear.lookback = a.mlp.lookback = lookback;
  a.emforecaster.horizon = a.dlinear.horizon = a.mlp.horizon = horizon;
  nlohmann::json j{
      {"data", data},
      {"value_column", value_column},
      {"interval_seconds", optional_json(interval_seconds)},
      {"label", label},
      {"delta", optional_json(delta)},
      {"downsample", downsample},
      {"split", {{"train", split.train}, {"val", split.val}, {"test", split.test}}},
      {"lookback", lookback},
      {"horizon", horizon},
      {"train",
       {{"max_epochs", train.max_epochs}, {"batch_size", train.batch_size}, {"patience", train.patience},
        {"lr", train.lr}}},
      {"seeds", seeds},
      {"alpha", alpha},
      {"beta", beta},
      {"lambda", lambda},
      {"tos_sign", tos_sign_name(tos_sign)},
      {"output", {{"report", report_path}, {"checkpoint", checkpoint_path}}},
  };
  const nlohmann::json arch_json = a.to_json();
  for (const auto& [k, v] : arch_json.items()) j[k] = v;
  return j;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) { return from_json(j, RunConfig{}); }

RunConfig RunConfig::from_json(const nlohmann::json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> known{"data",     "value_column", "interval_seconds", "label",   "delta",
                                           "downsample", "split",      "lookback",         "horizon", "model",
                                           "emforecaster", "dlinear",  "mlp",              "train",   "seeds",
                                           "alpha",    "beta",         "lambda",           "tos_sign", "output"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown config field '" + k + "'");
  }
  read_field(j, "data", c.data);
  read_field(j, "value_column", c.value_column);
  read_optional(j, "interval_seconds", c.interval_seconds);
  read_field(j, "label", c.label);
  read_optional(j, "delta", c.delta);
  read_field(j, "downsample", c.downsample);
  if (j.contains("split")) {
    const auto& s = j.at("split");
    read_field(s, "train", c.split.train);
    read_field(s, "val", c.split.val);
    read_field(s, "test", c.split.test);
  }
  read_field(j, "lookback", c.lookback);
  read_field(j, "horizon", c.horizon);
  try {
    nlohmann::json arch_json = c.arch.to_json();
    for (const char* key : {"model", "emforecaster", "dlinear", "mlp"}) {
      if (j.contains(key)) arch_json[key] = j.at(key);
    }
    model::ArchitectureConfig parsed = model::ArchitectureConfig::from_json(arch_json);
    // Sub-configs only replace fields that were given.
    if (!j.contains("emforecaster")) parsed.emforecaster = c.arch.emforecaster;
    if (!j.contains("dlinear")) parsed.dlinear = c.arch.dlinear;
    if (!j.contains("mlp")) parsed.mlp = c.arch.mlp;
    if (j.contains("emforecaster")) {
      nlohmann::json merged = c.arch.emforecaster.to_json();
      merged.update(j.at("emforecaster"));
      parsed.emforecaster = model::EmfConfig::from_json(merged);
    }
    if (j.contains("dlinear")) {
      nlohmann::json merged = c.arch.dlinear.to_json();
      merged.update(j.at("dlinear"));
      parsed.dlinear = baselines::DLinearConfig::from_json(merged);
    }
    if (j.contains("mlp")) {
      nlohmann::json merged = c.arch.mlp.to_json();
      merged.update(j.at("mlp"));
      parsed.mlp = baselines::MlpConfig::from_json(merged);
    }
    c.arch = parsed;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("architecture config is malformed: ") + e.what());
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    read_field(t, "max_epochs", c.train.max_epochs);
    read_field(t, "batch_size", c.train.batch_size);
    read_field(t, "patience", c.train.patience);
    read_field(t, "lr", c.train.lr);
  }
  read_field(j, "seeds", c.seeds);
  read_field(j, "alpha", c.alpha);
  read_field(j, "beta", c.beta);
  read_field(j, "lambda", c.lambda);
  if (j.contains("tos_sign")) {
    std::string s;
    read_field(j, "tos_sign", s);
    c.tos_sign = parse_tos_sign(s);
  }
  if (j.contains("output")) {
    read_field(j.at("output"), "report", c.report_path);
    read_field(j.at("output"), "checkpoint", c.checkpoint_path);
  }
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  return from_json(read_json_file(path));
}

void RunConfig::validate() const {
  require(!data.empty(), "--data is required (or set \"data\" in the config file)");
  require(std::filesystem::exists(data), "data file not found: " + data);
  require(delta.has_value(), "--delta (outlier threshold in V/m) is required");
  require(std::isfinite(*delta) && *delta > 0.0, "--delta must be a positive number");
  require(!interval_seconds || (std::isfinite(*interval_seconds) && *interval_seconds > 0.0),
          "--interval-seconds must be positive");
  require(downsample >= 1, "--downsample must be at least 1");
  require(split.train > 0.0 && split.val > 0.0 && split.test > 0.0, "split ratios must all be positive");
  require(std::abs(split.train + split.val + split.test - 1.0) <= 1e-9, "split ratios must sum to 1");
  require(lookback >= 2, "--lookback must be at least 2");
  require(horizon >= 1, "--horizon must be at least 1");
  require(!seeds.empty(), "--seeds must list at least one seed");
  require(alpha > 0.0 && alpha < 1.0, "--alpha must lie in (0, 1)");
  require(beta >= 0.0 && beta <= 1.0, "--beta must lie in [0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "--lambda must lie in [0, 1]");
  train.validate();
  switch (arch.kind) {
    case model::ModelKind::emforecaster: {
      model::EmfConfig e = arch.emforecaster;
      e.lookback = lookback;
      e.horizon = horizon;
      e.validate();
      break;
    }
    case model::ModelKind::dlinear: {
      baselines::DLinearConfig d = arch.dlinear;
      d.lookback = lookback;
      d.horizon = horizon;
      d.validate();
      break;
    }
    case model::ModelKind::mlp: {
      baselines::MlpConfig m = arch.mlp;
      m.lookback = lookback;
      m.horizon = horizon;
      m.validate();
      break;
    }
    case model::ModelKind::persistence: break;
  }
}

// ---------------------------------------------------------------------------

nlohmann::json PreparedData::summary() const {
  return {{"label", cleaned.origin_label},
          {"raw_length", raw_length},
          {"length", cleaned.size()},
          {"sample_interval", cleaned.sample_interval},
          {"outliers_replaced", outliers_replaced},
          {"train_mean", split.train_mean},
          {"train_std", split.train_std},
          {"segments", {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}}},
          {"windows", {{"train", train.size()}, {"val", val.size()}, {"test", test.size()}}}};
}

PreparedData prepare_data(const RunConfig& cfg) {
  PreparedData p;
  data::LoadOptions opts;
  opts.value_column = cfg.value_column;
  opts.interval_seconds = cfg.interval_seconds;
  opts.label = cfg.label;
  data::TimeSeries raw = in_stage("ingest", [&] { return data::load_series(cfg.data, opts); });
  p.raw_length = raw.size();
  if (cfg.downsample > 1) raw = in_stage("downsample", [&] { return data::downsample(raw, cfg.downsample); });
  if (!cfg.delta) throw StageError("interpolate", "outlier threshold delta is not set");
  p.cleaned = in_stage("interpolate", [&] { return data::interpolate_outliers(raw, *cfg.delta, &p.outliers_replaced); });
  p.split = in_stage("split", [&] { return data::split_and_normalize(p.cleaned, cfg.split); });
  auto windows = [&](const data::TimeSeries& seg, const char* name) {
    try {
      return data::make_windows(seg.values, cfg.lookback, cfg.horizon);
    } catch (const Error& e) {
      throw StageError("window", std::string(name) + " segment: " + e.what());
    }
  };
  p.train = windows(p.split.train, "train");
  p.val = windows(p.split.val, "validation");
  p.test = windows(p.split.test, "test");
  return p;
}

SeedResult assess(const model::Forecaster& model, const PreparedData& prepared, double alpha, double beta,
                  std::uint64_t seed, train::TrainHistory history) {
  SeedResult r;
  r.seed = seed;
  r.history = std::move(history);
  const train::Evaluation test = in_stage("evaluate", [&] { return train::evaluate(model, prepared.test); });
  r.test_mse = test.mse;
  r.band = in_stage("calibrate", [&] {
    const train::Evaluation val = train::evaluate(model, prepared.val);
    return conformal::calibrate_multistep(conformal::collect_residuals(val.forecasts, prepared.val.targets), alpha);
  });
  r.coverage = in_stage("coverage", [&] {
    return conformal::coverage_metrics(test.forecasts, prepared.test.targets, r.band);
  });
  r.wac = conformal::wac(r.coverage.jc, r.coverage.ic, beta);
  return r;
}

EvalReport make_report(const RunConfig& cfg, const PreparedData& prepared, const model::Forecaster& reference,
                       std::vector<SeedResult> per_seed) {
  if (per_seed.empty()) throw StateError("make_report: no seed results");
  EvalReport r;
  r.model_kind = model::to_string(reference.kind());
  r.dataset_label = prepared.cleaned.origin_label;
  r.lookback = cfg.lookback;
  r.horizon = cfg.horizon;
  r.alpha = cfg.alpha;
  r.beta = cfg.beta;
  r.lambda = cfg.lambda;
  for (const nn::Parameter* p : reference.const_parameters()) r.param_count += p->size();
  std::vector<double> mses, ics, jcs, miws, wacs;
  for (const auto& s : per_seed) {
    mses.push_back(s.test_mse);
    ics.push_back(s.coverage.ic);
    jcs.push_back(s.coverage.jc);
    miws.push_back(s.coverage.miw);
    wacs.push_back(s.wac);
  }
  r.test_mse_mean = mean_of(mses);
  r.test_mse_std = sample_std(mses);
  r.ic = mean_of(ics);
  r.jc = mean_of(jcs);
  r.miw = mean_of(miws);
  r.wac = mean_of(wacs);
  r.calibration_m = per_seed.front().band.m;
  r.n_test = per_seed.front().coverage.n_test;
  r.per_seed = std::move(per_seed);
  r.data = prepared.summary();
  r.config = cfg.to_json();
  return r;
}

nlohmann::json EvalReport::to_json(const nlohmann::json& run_info) const {
  nlohmann::json seeds = nlohmann::json::array();
  nlohmann::json per = nlohmann::json::array();
  nlohmann::json mses = nlohmann::json::array();
  for (const auto& s : per_seed) {
    seeds.push_back(s.seed);
    mses.push_back(s.test_mse);
    per.push_back({{"seed", s.seed},
                   {"test_mse", s.test_mse},
                   {"ic", s.coverage.ic},
                   {"jc", s.coverage.jc},
                   {"miw", s.coverage.miw},
                   {"wac", s.wac},
                   {"epsilons", s.band.epsilons},
                   {"training", s.history.to_json()}});
  }
  return {{"schema", kReportSchema},
          {"report_type", "evaluation"},
          {"artifact_version", kArtifactVersion},
          {"model_kind", model_kind},
          {"dataset_label", dataset_label},
          {"lookback", lookback},
          {"horizon", horizon},
          {"param_count", param_count},
          {"seeds", seeds},
          {"test_mse", {{"mean", test_mse_mean}, {"std", test_mse_std}, {"per_seed", mses}}},
          {"alpha", alpha},
          {"beta", beta},
          {"lambda", lambda},
          {"ic", ic},
          {"jc", jc},
          {"miw", miw},
          {"wac", wac},
          {"tos", tos ? nlohmann::json(*tos) : nlohmann::json()},
          {"calibration",
           {{"source", "validation"}, {"m", calibration_m}, {"per_step_alpha", alpha / static_cast<double>(horizon)}}},
          {"n_test", n_test},
          {"units", "z-scored with training mean and std"},
          {"per_seed", per},
          {"data", data},
          {"config", config},
          {"run_info", run_info}};
}

nlohmann::json checkpoint_meta(const RunConfig& cfg, const PreparedData& prepared, std::uint64_t seed) {
  // Output locations do not affect the weights, so identical runs give identical files.
  nlohmann::json run_config = cfg.to_json();
  run_config.erase("output");
  return {{"artifact_version", kArtifactVersion},
          {"seed", seed},
          {"dataset_label", prepared.cleaned.origin_label},
          {"normalization", {{"train_mean", prepared.split.train_mean}, {"train_std", prepared.split.train_std}}},
          {"run_config", run_config}};
}

PipelineOutput run_pipeline(const RunConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  PipelineOutput out;
  out.prepared = prepare_data(cfg);
  const PreparedData& prepared = out.prepared;
  auto say = [&](const std::string& line) {
    if (progress) progress(line);
  };
  say("data: " + std::to_string(prepared.cleaned.size()) + " samples, " + std::to_string(prepared.train.size()) +
      "/" + std::to_string(prepared.val.size()) + "/" + std::to_string(prepared.test.size()) +
      " train/val/test windows, " + std::to_string(prepared.outliers_replaced) + " outliers replaced");

  std::vector<SeedResult> results;
  for (std::uint64_t seed : cfg.seeds) {
    auto model = in_stage("build", [&] { return model::make_forecaster(cfg.arch, cfg.lookback, cfg.horizon, seed); });
    train::TrainHistory history;
    if (model->kind() != model::ModelKind::persistence) {
      train::TrainConfig tc = cfg.train;
      tc.seed = seed;
      history = in_stage("train", [&] {
        return train::train(*model, prepared.train, prepared.val, tc, [&](const train::EpochStats& e) {
          std::ostringstream line;
          line << "seed " << seed << " epoch " << e.epoch << " train_mse " << std::setprecision(6) << e.train_mse
               << " val_mse " << e.val_mse << (e.improved ? " *" : "");
          say(line.str());
        });
      });
    }
    results.push_back(assess(*model, prepared, cfg.alpha, cfg.beta, seed, std::move(history)));
    say("seed " + std::to_string(seed) + " test_mse " + std::to_string(results.back().test_mse));
    out.models.push_back(std::move(model));
  }
  out.report = make_report(cfg, prepared, *out.models.front(), std::move(results));
  return out;
}

// ---------------------------------------------------------------------------

TosTable tos_compare(const std::vector<nlohmann::json>& reports, const std::vector<std::string>& sources,
                     double beta, double lambda, conformal::TosSign sign) {
  if (reports.size() < 2) {
    throw SizeError("TOS comparison needs at least 2 reports, got " + std::to_string(reports.size()));
  }
  TosTable table;
  table.beta = beta;
  table.lambda = lambda;
  table.sign = sign;
  std::vector<conformal::TosInput> inputs;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const std::string src = i < sources.size() ? sources[i] : "report " + std::to_string(i + 1);
    TosRow row;
    std::string label;
    std::size_t L = 0;
    std::size_t O = 0;
    double alpha = 0.0;
    try {
      if (r.value("schema", "") != kReportSchema) throw ConfigError(src + ": not an " + std::string(kReportSchema) + " report");
      if (r.value("report_type", "evaluation") != "evaluation") {
        throw ConfigError(src + ": expected an evaluation report, got '" + r.value("report_type", "") + "'");
      }
      label = r.at("dataset_label").get<std::string>();
      L = r.at("lookback").get<std::size_t>();
      O = r.at("horizon").get<std::size_t>();
      alpha = r.at("alpha").get<double>();
      row.model_kind = r.at("model_kind").get<std::string>();
      row.ic = r.at("ic").get<double>();
      row.jc = r.at("jc").get<double>();
      row.miw = r.at("miw").get<double>();
      row.test_mse = r.at("test_mse").at("mean").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(src + ": malformed report: " + e.what());
    }
    row.source = src;
    if (i == 0) {
      table.dataset_label = label;
      table.lookback = L;
      table.horizon = O;
      table.alpha = alpha;
    } else if (label != table.dataset_label || L != table.lookback || O != table.horizon || alpha != table.alpha) {
      std::ostringstream msg;
      msg << "cannot compare " << src << " (dataset '" << label << "', L=" << L << ", O=" << O << ", alpha=" << alpha
          << ") with " << table.rows.front().source << " (dataset '" << table.dataset_label
          << "', L=" << table.lookback << ", O=" << table.horizon << ", alpha=" << table.alpha << ")";
      throw ComparabilityError(msg.str());
    }
    inputs.push_back({row.ic, row.jc, row.miw});
    table.rows.push_back(row);
  }
  const std::vector<double> scores = conformal::tos_scores(inputs, beta, lambda, sign);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    table.rows[i].tos = scores[i];
    table.rows[i].wac = conformal::wac(table.rows[i].jc, table.rows[i].ic, beta);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const TosRow& a, const TosRow& b) { return a.tos > b.tos; });
  for (std::size_t i = 0; i < table.rows.size(); ++i) table.rows[i].rank = i + 1;
  return table;
}

nlohmann::json TosTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"rank", r.rank},
                         {"model_kind", r.model_kind},
                         {"source", r.source},
                         {"tos", r.tos},
                         {"wac", r.wac},
                         {"ic", r.ic},
                         {"jc", r.jc},
                         {"miw", r.miw},
                         {"test_mse", r.test_mse}});
  }
  return {{"schema", kReportSchema},          {"report_type", "tos"},
          {"dataset_label", dataset_label}, {"lookback", lookback}, {"horizon", horizon},
          {"alpha", alpha},                 {"beta", beta},         {"lambda", lambda},
          {"tos_sign", tos_sign_name(sign)}, {"ranking", rows_json}};
}

std::string TosTable::to_text() const {
  std::ostringstream out;
  out << "dataset " << dataset_label << "  L=" << lookback << " O=" << horizon << " alpha=" << alpha
      << " beta=" << beta << " lambda=" << lambda << "\n";
  out << std::left << std::setw(5) << "rank" << std::setw(14) << "model" << std::right << std::setw(9) << "tos"
      << std::setw(9) << "wac" << std::setw(9) << "ic" << std::setw(9) << "jc" << std::setw(10) << "miw"
      << std::setw(12) << "test_mse" << "  source\n";
  out << std::fixed;
  for (const auto& r : rows) {
    out << std::left << std::setw(5) << r.rank << std::setw(14) << r.model_kind << std::right << std::setprecision(4)
        << std::setw(9) << r.tos << std::setw(9) << r.wac << std::setw(9) << r.ic << std::setw(9) << r.jc
        << std::setw(10) << r.miw << std::setprecision(6) << std::setw(12) << r.test_mse << "  " << r.source << "\n";
  }
  return out.str();
}

}  // namespace emf::cli
