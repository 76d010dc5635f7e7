#pragma once

#include "emf/nn/module.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace emf::data {

/// Univariate measurement record (V/m) sampled at a fixed interval.
struct TimeSeries {
  std::vector<double> values;
  double sample_interval = 1.0;  // seconds
  std::string origin_label;

  std::size_t size() const { return values.size(); }
};

/// Builds a series and checks its invariants (non-empty, finite, positive interval).
TimeSeries make_series(std::vector<double> values, double sample_interval, std::string label = {});

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

/// Contiguous train/val/test segments, z-scored with train statistics.
struct SplitSeries {
  TimeSeries train;
  TimeSeries val;
  TimeSeries test;
  double train_mean = 0.0;
  double train_std = 1.0;
};

/// Aligned (lookback, horizon) pairs; row i of inputs/targets is pair i.
struct WindowDataset {
  nn::Matrix inputs;   // [n x L]
  nn::Matrix targets;  // [n x O]
  std::size_t lookback = 0;
  std::size_t horizon = 0;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
  bool empty() const { return size() == 0; }
};

struct LoadOptions {
  std::string value_column = "value";
  std::optional<double> interval_seconds;
  std::string label;  // defaults to the "# label:" header or the file stem
};

/// Reads a CSV with a header row. '#' lines are comments; "# interval_seconds: X"
/// and "# label: NAME" are recognised as metadata. An optional `timestamp`
/// column (RFC 3339) must be strictly increasing and supplies the interval when
/// neither the option nor the metadata does.
TimeSeries load_series(const std::filesystem::path& path, const LoadOptions& options = {});
TimeSeries parse_series(std::istream& in, const LoadOptions& options, const std::string& source = "<stream>");

/// Writes a single `value` column with interval/label metadata lines. Values use
/// the shortest representation that parses back to the same double.
void write_series(const std::filesystem::path& path, const TimeSeries& s);
void write_series(std::ostream& out, const TimeSeries& s);

/// Seconds since the Unix epoch for an RFC 3339 timestamp.
double parse_rfc3339(const std::string& text);

/// Values strictly above delta are replaced by the mean of their original neighbours
/// (edge samples copy their single neighbour). One pass; length preserved.
TimeSeries interpolate_outliers(const TimeSeries& s, double delta, std::size_t* replaced = nullptr);

/// Splits at floor(train*T) and floor((train+val)*T); z-scores every segment with
/// the train mean and sample (n-1) standard deviation.
SplitSeries split_and_normalize(const TimeSeries& s, const SplitRatios& ratios = {});

/// Stride-1 windows: n = len - L - O + 1.
WindowDataset make_windows(std::span<const double> segment, std::size_t lookback, std::size_t horizon);

/// Means of consecutive non-overlapping blocks of k samples; trailing partial block dropped.
TimeSeries downsample(const TimeSeries& s, std::size_t k);

/// First-order differences y_t = x_{t+1} - x_t.
TimeSeries difference(const TimeSeries& s);

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator).
double sample_std(std::span<const double> xs);

}  // namespace emf::data
