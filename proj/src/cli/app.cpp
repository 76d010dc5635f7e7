#include "emf/cli/app.hpp"

#include "emf/analysis/adf.hpp"
#include "emf/analysis/correlation.hpp"
#include "emf/analysis/spectrum.hpp"
#include "emf/cli/run.hpp"
#include "emf/cli/selftest.hpp"
#include "emf/error.hpp"
#include "emf/parallel.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <limits>

namespace emf::cli {

namespace {

struct DataFlags {
  std::optional<std::string> data;
  std::optional<std::string> value_column;
  std::optional<std::string> label;
  std::optional<double> interval_seconds;
  std::optional<double> delta;
  std::optional<std::size_t> downsample;
  std::optional<double> train_ratio;
  std::optional<double> val_ratio;
  std::optional<double> test_ratio;

  void add_to(CLI::App& app, bool with_split) {
    app.add_option("--data", data, "CSV file with a header row");
    app.add_option("--value-column", value_column, "Column holding the measurements (default: value)");
    app.add_option("--label", label, "Dataset label (default: '# label:' metadata or file stem)");
    app.add_option("--interval-seconds", interval_seconds, "Sample interval; overrides metadata and timestamps");
    app.add_option("--delta", delta, "Outlier threshold in V/m; values strictly above it are interpolated");
    app.add_option("--downsample", downsample, "Average non-overlapping blocks of k samples before modelling");
    if (with_split) {
      app.add_option("--train-ratio", train_ratio, "Training share of the series (default 0.7)");
      app.add_option("--val-ratio", val_ratio, "Validation share, also the calibration set (default 0.1)");
      app.add_option("--test-ratio", test_ratio, "Test share (default 0.2)");
    }
  }

  void apply(RunConfig& c) const {
    if (data) c.data = *data;
    if (value_column) c.value_column = *value_column;
    if (label) c.label = *label;
    if (interval_seconds) c.interval_seconds = *interval_seconds;
    if (delta) c.delta = *delta;
    if (downsample) c.downsample = *downsample;
    if (train_ratio) c.split.train = *train_ratio;
    if (val_ratio) c.split.val = *val_ratio;
    if (test_ratio) c.split.test = *test_ratio;
  }
};

struct ConformalFlags {
  std::optional<double> alpha;
  std::optional<double> beta;
  std::optional<double> lambda;
  bool verbatim_sign = false;

  void add_to(CLI::App& app) {
    app.add_option("--alpha", alpha, "Target error rate in (0, 1) (default 0.1)");
    app.add_option("--beta", beta, "Weight of joint coverage in WAC (default 2/3)");
    app.add_option("--lambda", lambda, "Weight of WAC against interval width in TOS (default 0.5)");
    app.add_flag("--verbatim-sign", verbatim_sign, "Use 1/(1+e^z) for the TOS width term, which favours wide intervals");
  }

  void apply(RunConfig& c) const {
    if (alpha) c.alpha = *alpha;
    if (beta) c.beta = *beta;
    if (lambda) c.lambda = *lambda;
    if (verbatim_sign) c.tos_sign = conformal::TosSign::verbatim;
  }
};

struct ModelFlags {
  std::optional<std::string> config;
  std::optional<std::string> model;
  std::optional<std::size_t> lookback;
  std::optional<std::size_t> horizon;
  std::optional<std::size_t> patch_len;
  std::optional<std::size_t> patch_stride;
  std::optional<std::size_t> embed_dim;
  std::optional<std::size_t> hidden_dim;
  std::optional<std::size_t> blocks;
  std::optional<std::size_t> dlinear_m;
  std::optional<std::vector<std::size_t>> mlp_hidden;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> patience;
  std::optional<double> lr;
  std::optional<std::vector<std::uint64_t>> seeds;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "JSON run config; flags given on the command line override it");
    app.add_option("--model", model, "emforecaster | dlinear | mlp | persistence");
    app.add_option("--lookback", lookback, "Lookback window L (default 336)");
    app.add_option("--horizon", horizon, "Forecast horizon O (default 96)");
    app.add_option("--patch-len", patch_len, "EMForecaster patch length P");
    app.add_option("--patch-stride", patch_stride, "EMForecaster patch stride S");
    app.add_option("--embed-dim", embed_dim, "EMForecaster embedding dimension D");
    app.add_option("--hidden-dim", hidden_dim, "EMForecaster mixer hidden dimension D_h");
    app.add_option("--blocks", blocks, "EMForecaster mixing block count K");
    app.add_option("--dlinear-m", dlinear_m, "DLinear moving-average half window m (kernel 2m+1)");
    app.add_option("--mlp-hidden", mlp_hidden, "MLP hidden widths, comma separated")->delimiter(',');
    app.add_option("--epochs", epochs, "Maximum epochs (default 100)");
    app.add_option("--batch-size", batch_size, "Mini-batch size (default 2048)");
    app.add_option("--patience", patience, "Early-stopping patience in epochs (default 20)");
    app.add_option("--lr", lr, "Adam learning rate (default 1e-3)");
    app.add_option("--seeds", seeds, "Seeds, comma separated; one training run per seed")->delimiter(',');
  }

  RunConfig resolve() const {
    RunConfig c = config ? RunConfig::from_file(*config) : RunConfig{};
    if (model) c.arch.kind = model::parse_model_kind(*model);
    if (lookback) c.lookback = *lookback;
    if (horizon) c.horizon = *horizon;
    if (patch_len) c.arch.emforecaster.patch_len = *patch_len;
    if (patch_stride) c.arch.emforecaster.patch_stride = *patch_stride;
    if (embed_dim) c.arch.emforecaster.embed_dim = *embed_dim;
    if (hidden_dim) c.arch.emforecaster.hidden_dim = *hidden_dim;
    if (blocks) c.arch.emforecaster.blocks = *blocks;
    if (dlinear_m) c.arch.dlinear.half_window = *dlinear_m;
    if (mlp_hidden) c.arch.mlp.hidden = *mlp_hidden;
    if (epochs) c.train.max_epochs = *epochs;
    if (batch_size) c.train.batch_size = *batch_size;
    if (patience) c.train.patience = *patience;
    if (lr) c.train.lr = *lr;
    if (seeds) c.seeds = *seeds;
    return c;
  }
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

nlohmann::json run_info(const Stopwatch& watch) {
  return {{"generated_at", utc_now()}, {"wall_seconds", watch.seconds()}, {"threads", worker_count()}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f << text;
  if (!f) throw ConfigError("write failed for " + path);
}

void emit_json(std::ostream& out, const nlohmann::json& j, const std::string& path = {}) {
  const std::string text = j.dump(2) + "\n";
  out << text;
  if (!path.empty()) write_text(path, text);
}

// ---------------------------------------------------------------------------

int cmd_ingest(const DataFlags& flags, const std::optional<std::string>& out_csv, std::ostream& out) {
  if (!flags.data) throw ConfigError("--data is required");
  data::LoadOptions opts;
  if (flags.value_column) opts.value_column = *flags.value_column;
  opts.interval_seconds = flags.interval_seconds;
  if (flags.label) opts.label = *flags.label;
  data::TimeSeries s = data::load_series(*flags.data, opts);
  const std::size_t raw = s.size();
  if (flags.downsample && *flags.downsample > 1) s = data::downsample(s, *flags.downsample);
  std::size_t replaced = 0;
  if (flags.delta) {
    if (!(*flags.delta > 0.0)) throw ConfigError("--delta must be positive");
    s = data::interpolate_outliers(s, *flags.delta, &replaced);
  }
  if (out_csv) data::write_series(*out_csv, s);
  const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
  emit_json(out, {{"schema", kReportSchema},
                  {"report_type", "ingest"},
                  {"label", s.origin_label},
                  {"raw_length", raw},
                  {"length", s.size()},
                  {"sample_interval", s.sample_interval},
                  {"outliers_replaced", replaced},
                  {"delta", flags.delta ? nlohmann::json(*flags.delta) : nlohmann::json()},
                  {"min", *lo},
                  {"max", *hi},
                  {"mean", data::mean(s.values)},
                  {"std", s.size() > 1 ? data::sample_std(s.values) : 0.0},
                  {"written", out_csv ? nlohmann::json(*out_csv) : nlohmann::json()}});
  return 0;
}

struct AnalyzeFlags {
  std::vector<std::string> data;
  std::optional<std::string> value_column;
  std::optional<double> interval_seconds;
  std::optional<double> delta;
  std::optional<std::size_t> downsample;
  bool difference = false;
  std::optional<std::size_t> max_lag;
  std::optional<std::size_t> lag;
  std::size_t top = 3;
};

std::string level_key(double level) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", level);
  return buf;
}

nlohmann::json level_map(const std::array<bool, 3>& values) {
  nlohmann::json j;
  for (std::size_t i = 0; i < analysis::kAdfLevels.size(); ++i) {
    j[level_key(analysis::kAdfLevels[i])] = values[i];
  }
  return j;
}

int cmd_analyze(const AnalyzeFlags& f, std::ostream& out) {
  nlohmann::json series_json = nlohmann::json::array();
  std::vector<std::vector<double>> all;
  std::vector<std::string> labels;
  for (const auto& path : f.data) {
    data::LoadOptions opts;
    if (f.value_column) opts.value_column = *f.value_column;
    opts.interval_seconds = f.interval_seconds;
    data::TimeSeries s = data::load_series(path, opts);
    if (f.downsample && *f.downsample > 1) s = data::downsample(s, *f.downsample);
    if (f.delta) s = data::interpolate_outliers(s, *f.delta);
    if (f.difference) s = data::difference(s);

    const analysis::AdfResult adf = analysis::adf_test(s.values, f.max_lag, f.lag);
    nlohmann::json crit;
    for (std::size_t i = 0; i < analysis::kAdfLevels.size(); ++i) {
      crit[level_key(analysis::kAdfLevels[i])] =
          analysis::kAdfTrendCriticalValues[i];
    }
    const analysis::Spectrum spec = analysis::fft_magnitudes(s.values);
    const auto dominant = analysis::dominant_period(spec);
    nlohmann::json top = nlohmann::json::array();
    nlohmann::json top_seconds = nlohmann::json::array();
    for (double p : analysis::top_periods(spec, f.top)) {
      top.push_back(p);
      top_seconds.push_back(p * s.sample_interval);
    }
    series_json.push_back(
        {{"label", s.origin_label},
         {"source", path},
         {"length", s.size()},
         {"differenced", f.difference},
         {"adf",
          {{"statistic", adf.statistic},
           {"lag", adf.lag_order},
           {"n_effective", adf.n_effective},
           {"critical_values", crit},
           {"reject", level_map(adf.reject)}}},
         {"fft",
          {{"dominant_period_samples", dominant ? nlohmann::json(*dominant) : nlohmann::json()},
           {"dominant_period_seconds", dominant ? nlohmann::json(*dominant * s.sample_interval) : nlohmann::json()},
           {"top_periods", top},
           {"top_periods_seconds", top_seconds}}}});
    labels.push_back(s.origin_label);
    all.push_back(std::move(s.values));
  }
  nlohmann::json result{{"schema", kReportSchema}, {"report_type", "analysis"}, {"series", series_json}};
  if (all.size() >= 2) {
    std::size_t common = std::numeric_limits<std::size_t>::max();
    for (const auto& v : all) common = std::min(common, v.size());
    const auto corr = analysis::correlation_matrix(all, common);
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : corr) {
      nlohmann::json r = nlohmann::json::array();
      for (const auto& v : row) r.push_back(v ? nlohmann::json(*v) : nlohmann::json());
      rows.push_back(r);
    }
    result["correlation"] = rows;
    result["correlation_labels"] = labels;
    result["correlation_length"] = common;
  }
  emit_json(out, result);
  return 0;
}

int cmd_train(RunConfig cfg, const std::optional<std::string>& out_path, const std::optional<std::string>& report_path,
              bool quiet, std::ostream& out, std::ostream& err) {
  if (out_path) cfg.checkpoint_path = *out_path;
  if (report_path) cfg.report_path = *report_path;
  const Stopwatch watch;
  PipelineOutput result = run_pipeline(cfg, [&](const std::string& line) {
    if (!quiet) err << line << std::endl;
  });
  if (!cfg.checkpoint_path.empty()) {
    model::save_forecaster(cfg.checkpoint_path, *result.models.front(),
                           checkpoint_meta(cfg, result.prepared, cfg.seeds.front()));
  }
  emit_json(out, result.report.to_json(run_info(watch)), cfg.report_path);
  return 0;
}

struct Loaded {
  RunConfig cfg;
  model::LoadedForecaster model;
  std::uint64_t seed = 0;
};

Loaded load_for_eval(const std::string& checkpoint, const DataFlags& data_flags, const ConformalFlags& cf) {
  Loaded l;
  l.model = model::load_forecaster(checkpoint);
  if (!l.model.meta.contains("run_config")) throw CheckpointError(checkpoint + ": no run_config in header");
  l.cfg = RunConfig::from_json(l.model.meta.at("run_config"));
  l.seed = l.model.meta.value("seed", std::uint64_t{0});
  data_flags.apply(l.cfg);
  cf.apply(l.cfg);
  l.cfg.seeds = {l.seed};
  l.cfg.validate();
  if (l.model.model->lookback() != l.cfg.lookback || l.model.model->horizon() != l.cfg.horizon) {
    throw CheckpointError("checkpoint model shape does not match its run config");
  }
  return l;
}

int cmd_eval(const std::string& checkpoint, const DataFlags& df, const ConformalFlags& cf,
             const std::optional<std::string>& report_path, std::ostream& out) {
  const Stopwatch watch;
  Loaded l = load_for_eval(checkpoint, df, cf);
  if (report_path) l.cfg.report_path = *report_path;
  const PreparedData prepared = prepare_data(l.cfg);
  std::vector<SeedResult> results{assess(*l.model.model, prepared, l.cfg.alpha, l.cfg.beta, l.seed)};
  const EvalReport report = make_report(l.cfg, prepared, *l.model.model, std::move(results));
  emit_json(out, report.to_json(run_info(watch)), l.cfg.report_path);
  return 0;
}

int cmd_conformal(const std::string& checkpoint, const DataFlags& df, const ConformalFlags& cf,
                  const std::optional<std::string>& out_path, std::ostream& out) {
  const Stopwatch watch;
  Loaded l = load_for_eval(checkpoint, df, cf);
  const PreparedData prepared = prepare_data(l.cfg);
  SeedResult r = assess(*l.model.model, prepared, l.cfg.alpha, l.cfg.beta, l.seed);
  const std::vector<double> epsilons = r.band.epsilons;
  std::vector<SeedResult> results;
  results.push_back(std::move(r));
  const EvalReport report = make_report(l.cfg, prepared, *l.model.model, std::move(results));
  nlohmann::json j = report.to_json(run_info(watch));
  j["epsilons"] = epsilons;
  emit_json(out, j, out_path.value_or(""));
  return 0;
}

int cmd_tos(const std::vector<std::string>& paths, double beta, double lambda, bool verbatim,
            const std::string& format, const std::optional<std::string>& out_path, std::ostream& out) {
  std::vector<nlohmann::json> reports;
  for (const auto& p : paths) reports.push_back(read_json_file(p));
  const TosTable table = tos_compare(reports, paths, beta, lambda,
                                     verbatim ? conformal::TosSign::verbatim : conformal::TosSign::intended);
  if (out_path) write_text(*out_path, table.to_json().dump(2) + "\n");
  if (format == "text") {
    out << table.to_text();
  } else {
    out << table.to_json().dump(2) << "\n";
  }
  return 0;
}

struct SweepFlags {
  std::optional<std::string> grid;
  std::vector<std::size_t> patch_lens;
  std::vector<std::size_t> embed_dims;
  std::vector<std::size_t> hidden_dims;
  std::vector<std::size_t> block_counts;
  std::vector<double> lrs;
  bool parallel = false;
  std::optional<std::string> best_out;
};

std::vector<RunConfig> expand_grid(const RunConfig& base, const SweepFlags& f) {
  std::vector<RunConfig> cells;
  if (f.grid) {
    nlohmann::json g = read_json_file(*f.grid);
    if (g.is_object() && g.contains("cells")) g = g.at("cells");
    if (!g.is_array() || g.empty()) throw ConfigError(*f.grid + ": grid must be a non-empty array of overrides");
    for (const auto& cell : g) cells.push_back(RunConfig::from_json(cell, base));
    return cells;
  }
  auto or_base = [](const std::vector<std::size_t>& v, std::size_t b) { return v.empty() ? std::vector{b} : v; };
  const auto& e = base.arch.emforecaster;
  const std::vector<double> lrs = f.lrs.empty() ? std::vector{base.train.lr} : f.lrs;
  for (std::size_t p : or_base(f.patch_lens, e.patch_len))
    for (std::size_t d : or_base(f.embed_dims, e.embed_dim))
      for (std::size_t h : or_base(f.hidden_dims, e.hidden_dim))
        for (std::size_t k : or_base(f.block_counts, e.blocks))
          for (double lr : lrs) {
            RunConfig c = base;
            c.arch.emforecaster.patch_len = p;
            c.arch.emforecaster.patch_stride = std::min(c.arch.emforecaster.patch_stride, p);
            c.arch.emforecaster.embed_dim = d;
            c.arch.emforecaster.hidden_dim = h;
            c.arch.emforecaster.blocks = k;
            c.train.lr = lr;
            cells.push_back(c);
          }
  return cells;
}

int cmd_sweep(const RunConfig& base, const SweepFlags& f, std::ostream& out) {
  base.validate();
  const std::vector<RunConfig> cells = expand_grid(base, f);
  for (const auto& c : cells) {
    if (c.lookback != base.lookback || c.horizon != base.horizon || c.data != base.data) {
      throw ConfigError("sweep cells must share data, lookback and horizon");
    }
  }
  const PreparedData prepared = prepare_data(base);
  std::vector<train::SweepCell> grid;
  for (const auto& c : cells) {
    train::TrainConfig tc = c.train;
    tc.seed = c.seeds.front();
    grid.push_back({c.arch, tc});
  }
  const train::SweepResult result = train::sweep(grid, prepared.train, prepared.val, f.parallel);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& o : result.cells) {
    rows.push_back({{"index", o.index},
                    {"architecture", cells[o.index].arch.to_json()},
                    {"train", grid[o.index].train.to_json()},
                    {"param_count", o.param_count},
                    {"val_mse", o.val_mse ? nlohmann::json(*o.val_mse) : nlohmann::json()},
                    {"best_epoch", o.history.best_epoch},
                    {"error", o.error.empty() ? nlohmann::json() : nlohmann::json(o.error)}});
  }
  if (!result.best) throw TrainingDivergenceError("sweep: every grid cell failed", 0);
  const nlohmann::json best_cfg = cells[*result.best].to_json();
  if (f.best_out) write_text(*f.best_out, best_cfg.dump(2) + "\n");
  emit_json(out, {{"schema", kReportSchema},
                  {"report_type", "sweep"},
                  {"cells", rows},
                  {"best", *result.best},
                  {"best_config", best_cfg}});
  return 0;
}

int cmd_selftest(const std::optional<std::string>& fixtures, std::size_t length, std::uint64_t seed,
                 std::ostream& out) {
  if (fixtures) {
    for (const auto& p : write_fixtures(*fixtures, length, seed)) out << "wrote " << p.string() << "\n";
    return 0;
  }
  bool ok = true;
  for (const auto& c : run_selftest()) {
    out << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << c.detail << "\n";
    ok = ok && c.passed;
  }
  return ok ? 0 : 2;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"emf: EMF exposure forecasting with conformal intervals", "emf"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kArtifactVersion);
  app.footer("Exit codes: 0 ok, 1 user error, 2 internal error. EMF_THREADS caps worker threads.");

  auto* ingest = app.add_subcommand("ingest", "Load a CSV series, optionally clean it, print a summary");
  DataFlags ingest_data;
  std::optional<std::string> ingest_out;
  ingest_data.add_to(*ingest, false);
  ingest->add_option("--out", ingest_out, "Write the cleaned series to this CSV");

  auto* analyze = app.add_subcommand("analyze", "ADF test, spectrum and cross-correlation of series");
  AnalyzeFlags af;
  analyze->add_option("--data", af.data, "CSV file(s); two or more also yield a correlation matrix")->required();
  analyze->add_option("--value-column", af.value_column, "Column holding the measurements (default: value)");
  analyze->add_option("--interval-seconds", af.interval_seconds, "Sample interval");
  analyze->add_option("--delta", af.delta, "Interpolate outliers above this threshold first");
  analyze->add_option("--downsample", af.downsample, "Average blocks of k samples first");
  analyze->add_flag("--difference", af.difference, "Analyse first differences");
  analyze->add_option("--max-lag", af.max_lag, "Upper bound of the AIC lag search (default: Schwert rule)");
  analyze->add_option("--lag", af.lag, "Use this ADF lag order without searching");
  analyze->add_option("--top", af.top, "Number of spectral peaks to list (default 3)");

  auto* train_cmd = app.add_subcommand("train", "Train per seed, evaluate, calibrate; print the report");
  DataFlags train_data;
  ModelFlags train_model;
  ConformalFlags train_cf;
  std::optional<std::string> train_out;
  std::optional<std::string> train_report;
  bool train_quiet = false;
  train_data.add_to(*train_cmd, true);
  train_model.add_to(*train_cmd);
  train_cf.add_to(*train_cmd);
  train_cmd->add_option("--out", train_out, "Checkpoint path (model of the first seed)");
  train_cmd->add_option("--report", train_report, "Also write the report to this file");
  train_cmd->add_flag("--quiet", train_quiet, "Suppress progress lines on standard error");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split of its data");
  std::string eval_ckpt;
  DataFlags eval_data;
  ConformalFlags eval_cf;
  std::optional<std::string> eval_report;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint written by train")->required();
  eval_data.add_to(*eval_cmd, false);
  eval_cf.add_to(*eval_cmd);
  eval_cmd->add_option("--report", eval_report, "Also write the report to this file");

  auto* conf_cmd = app.add_subcommand("conformal", "Calibrate intervals for a checkpoint and report coverage");
  std::string conf_ckpt;
  DataFlags conf_data;
  ConformalFlags conf_cf;
  std::optional<std::string> conf_out;
  conf_cmd->add_option("--checkpoint", conf_ckpt, "Checkpoint written by train")->required();
  conf_data.add_to(*conf_cmd, false);
  conf_cf.add_to(*conf_cmd);
  conf_cmd->add_option("--out", conf_out, "Also write the JSON to this file");

  auto* tos_cmd = app.add_subcommand("tos", "Rank two or more reports by Trade-off Score");
  std::vector<std::string> tos_reports;
  double tos_beta = 2.0 / 3.0;
  double tos_lambda = 0.5;
  bool tos_verbatim = false;
  std::string tos_format = "json";
  std::optional<std::string> tos_out;
  tos_cmd->add_option("reports,--report", tos_reports, "Report files from train or eval")->required();
  tos_cmd->add_option("--beta", tos_beta, "Weight of joint coverage in WAC (default 2/3)");
  tos_cmd->add_option("--lambda", tos_lambda, "Weight of WAC against interval width (default 0.5)");
  tos_cmd->add_flag("--verbatim-sign", tos_verbatim, "Use 1/(1+e^z) for the width term, which favours wide intervals");
  tos_cmd->add_option("--format", tos_format, "json | text")->check(CLI::IsMember({"json", "text"}));
  tos_cmd->add_option("--out", tos_out, "Also write the JSON table to this file");

  auto* sweep_cmd = app.add_subcommand("sweep", "Grid search over EMForecaster settings by validation MSE");
  DataFlags sweep_data;
  ModelFlags sweep_model;
  SweepFlags sf;
  sweep_data.add_to(*sweep_cmd, true);
  sweep_model.add_to(*sweep_cmd);
  sweep_cmd->add_option("--grid", sf.grid, "JSON array of config overrides, one per cell");
  sweep_cmd->add_option("--patch-lens", sf.patch_lens, "Patch lengths to try")->delimiter(',');
  sweep_cmd->add_option("--embed-dims", sf.embed_dims, "Embedding dimensions to try")->delimiter(',');
  sweep_cmd->add_option("--hidden-dims", sf.hidden_dims, "Mixer hidden dimensions to try")->delimiter(',');
  sweep_cmd->add_option("--block-counts", sf.block_counts, "Block counts to try")->delimiter(',');
  sweep_cmd->add_option("--lrs", sf.lrs, "Learning rates to try")->delimiter(',');
  sweep_cmd->add_flag("--parallel", sf.parallel, "Train cells concurrently");
  sweep_cmd->add_option("--best-out", sf.best_out, "Write the winning run config to this file");

  auto* selftest = app.add_subcommand("selftest", "Run built-in numerical checks or write fixtures");
  std::optional<std::string> fixtures;
  std::size_t fixture_length = 20000;
  std::uint64_t fixture_seed = 7;
  selftest->add_option("--fixtures", fixtures, "Write synthetic fixture CSVs into this directory");
  selftest->add_option("--fixture-length", fixture_length, "Samples per fixture (default 20000)");
  selftest->add_option("--fixture-seed", fixture_seed, "Noise seed (default 7)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    out << target->help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kArtifactVersion << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    const CLI::App* target = &app;
    for (const auto* sub : app.get_subcommands()) target = sub;
    err << "emf: " << e.what() << "\n\n" << target->help();
    return 1;
  }

  try {
    if (ingest->parsed()) return cmd_ingest(ingest_data, ingest_out, out);
    if (analyze->parsed()) return cmd_analyze(af, out);
    if (train_cmd->parsed()) {
      RunConfig cfg = train_model.resolve();
      train_data.apply(cfg);
      train_cf.apply(cfg);
      return cmd_train(cfg, train_out, train_report, train_quiet, out, err);
    }
    if (eval_cmd->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_cf, eval_report, out);
    if (conf_cmd->parsed()) return cmd_conformal(conf_ckpt, conf_data, conf_cf, conf_out, out);
    if (tos_cmd->parsed()) return cmd_tos(tos_reports, tos_beta, tos_lambda, tos_verbatim, tos_format, tos_out, out);
    if (sweep_cmd->parsed()) {
      RunConfig cfg = sweep_model.resolve();
      sweep_data.apply(cfg);
      return cmd_sweep(cfg, sf, out);
    }
    if (selftest->parsed()) return cmd_selftest(fixtures, fixture_length, fixture_seed, out);
  } catch (const Error& e) {
    err << "emf: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "emf: internal error: " << e.what() << "\n";
    return 2;
  }
  err << "emf: internal error: no subcommand handled\n";
  return 2;
}

}  // namespace emf::cli
