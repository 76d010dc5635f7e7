#include "emf/data/pipeline.hpp"

#include "emf/error.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace emf::data {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(first, last - first + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
      current.push_back(c);
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(trim(current));
  return fields;
}

std::optional<double> to_double(const std::string& text) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

int to_int(std::string_view text, const std::string& whole) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError("malformed RFC 3339 timestamp '" + whole + "'");
  }
  return value;
}

// "# key: value" or "# key=value"
std::optional<std::pair<std::string, std::string>> metadata_entry(const std::string& comment) {
  const std::string body = trim(std::string_view(comment).substr(1));
  const auto sep = body.find_first_of(":=");
  if (sep == std::string::npos) return std::nullopt;
  return std::make_pair(trim(std::string_view(body).substr(0, sep)), trim(std::string_view(body).substr(sep + 1)));
}

void require_finite(const std::vector<double>& xs) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) throw ParseError("non-finite value at index " + std::to_string(i));
  }
}

std::size_t floor_index(double fraction, std::size_t total) {
  // Tolerate representation error in fractions such as 0.7 + 0.1.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total) + 1e-9));
}

TimeSeries segment(const TimeSeries& s, std::size_t begin, std::size_t end, double mu, double sigma) {
  TimeSeries out;
  out.sample_interval = s.sample_interval;
  out.origin_label = s.origin_label;
  out.values.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) out.values.push_back((s.values[i] - mu) / sigma);
  return out;
}

}  // namespace

TimeSeries make_series(std::vector<double> values, double sample_interval, std::string label) {
  if (values.empty()) throw SizeError("time series must contain at least one value");
  require_finite(values);
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) {
    throw ConfigError("sample interval must be positive, got " + std::to_string(sample_interval));
  }
  return TimeSeries{std::move(values), sample_interval, std::move(label)};
}

double parse_rfc3339(const std::string& text) {
  // YYYY-MM-DD[T ]HH:MM:SS[.frac](Z|+HH:MM|-HH:MM)
  if (text.size() < 20 || text[4] != '-' || text[7] != '-' || (text[10] != 'T' && text[10] != 't' && text[10] != ' ') ||
      text[13] != ':' || text[16] != ':') {
    throw ParseError("malformed RFC 3339 timestamp '" + text + "'");
  }
  const std::string_view v(text);
  const int year = to_int(v.substr(0, 4), text);
  const int month = to_int(v.substr(5, 2), text);
  const int day = to_int(v.substr(8, 2), text);
  const int hour = to_int(v.substr(11, 2), text);
  const int minute = to_int(v.substr(14, 2), text);
  const int second = to_int(v.substr(17, 2), text);

  std::size_t pos = 19;
  double fraction = 0.0;
  if (pos < text.size() && text[pos] == '.') {
    const std::size_t start = pos;
    ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos == start + 1) throw ParseError("malformed fractional seconds in '" + text + "'");
    fraction = std::stod("0" + text.substr(start, pos - start));
  }
  int offset_seconds = 0;
  if (pos < text.size() && (text[pos] == 'Z' || text[pos] == 'z')) {
    ++pos;
  } else if (pos + 6 == text.size() && (text[pos] == '+' || text[pos] == '-') && text[pos + 3] == ':') {
    const int sign = text[pos] == '+' ? 1 : -1;
    offset_seconds = sign * (to_int(v.substr(pos + 1, 2), text) * 3600 + to_int(v.substr(pos + 4, 2), text) * 60);
    pos += 6;
  } else {
    throw ParseError("RFC 3339 timestamp '" + text + "' lacks a UTC offset");
  }
  if (pos != text.size()) throw ParseError("trailing characters in timestamp '" + text + "'");

  using namespace std::chrono;
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{static_cast<unsigned>(month)},
                           std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok() || hour > 23 || minute > 59 || second > 60) {
    throw ParseError("timestamp out of range '" + text + "'");
  }
  const auto days = sys_days{ymd}.time_since_epoch().count();
  return static_cast<double>(days) * 86400.0 + hour * 3600.0 + minute * 60.0 + second + fraction -
         offset_seconds;
}

TimeSeries parse_series(std::istream& in, const LoadOptions& options, const std::string& source) {
  std::optional<double> meta_interval;
  std::string meta_label;
  std::vector<std::string> header;
  std::ptrdiff_t value_idx = -1;
  std::ptrdiff_t time_idx = -1;
  std::vector<double> values;
  std::vector<double> times;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    if (stripped.front() == '#') {
      if (auto entry = metadata_entry(stripped)) {
        if (entry->first == "interval_seconds") {
          meta_interval = to_double(entry->second);
          if (!meta_interval) {
            throw ParseError(source + ":" + std::to_string(line_no) + ": bad interval_seconds metadata");
          }
        } else if (entry->first == "label") {
          meta_label = entry->second;
        }
      }
      continue;
    }
    const auto fields = split_fields(line);
    if (header.empty()) {
      header = fields;
      for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == options.value_column) value_idx = static_cast<std::ptrdiff_t>(i);
        if (header[i] == "timestamp") time_idx = static_cast<std::ptrdiff_t>(i);
      }
      if (value_idx < 0) {
        throw ParseError(source + ": no column named '" + options.value_column + "' in header");
      }
      continue;
    }
    const std::string where = source + ":" + std::to_string(line_no);
    if (static_cast<std::ptrdiff_t>(fields.size()) <= std::max(value_idx, time_idx)) {
      throw ParseError(where + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    const auto value = to_double(fields[static_cast<std::size_t>(value_idx)]);
    if (!value) {
      throw ParseError(where + ": value '" + fields[static_cast<std::size_t>(value_idx)] +
                       "' in column '" + options.value_column + "' is not a finite number");
    }
    if (time_idx >= 0) {
      double t = 0.0;
      try {
        t = parse_rfc3339(fields[static_cast<std::size_t>(time_idx)]);
      } catch (const ParseError& e) {
        throw ParseError(where + ": " + e.what());
      }
      if (!times.empty() && !(t > times.back())) {
        throw ParseError(where + ": timestamps are not strictly increasing");
      }
      times.push_back(t);
    }
    values.push_back(*value);
  }

  if (header.empty() || values.empty()) throw ParseError(source + ": no data rows");

  double interval = 0.0;
  if (options.interval_seconds) {
    interval = *options.interval_seconds;
  } else if (meta_interval) {
    interval = *meta_interval;
  } else if (times.size() >= 2) {
    interval = times[1] - times[0];
  } else {
    throw ConfigError(source +
                      ": sample interval unknown; add a timestamp column, an '# interval_seconds:' header, "
                      "or pass --interval-seconds");
  }
  std::string label = !options.label.empty() ? options.label : meta_label;
  return make_series(std::move(values), interval, std::move(label));
}

void write_series(std::ostream& out, const TimeSeries& s) {
  char buf[64];
  auto shortest = [&buf](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  out << "# interval_seconds: " << shortest(s.sample_interval) << "\n";
  if (!s.origin_label.empty()) out << "# label: " << s.origin_label << "\n";
  out << "value\n";
  for (double v : s.values) out << shortest(v) << "\n";
}

void write_series(const std::filesystem::path& path, const TimeSeries& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  write_series(out, s);
  if (!out) throw ParseError("write failed for " + path.string());
}

TimeSeries load_series(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  LoadOptions opts = options;
  TimeSeries s = parse_series(in, opts, path.string());
  if (s.origin_label.empty()) s.origin_label = path.stem().string();
  return s;
}

TimeSeries interpolate_outliers(const TimeSeries& s, double delta, std::size_t* replaced) {
  if (!(delta > 0.0)) throw ConfigError("outlier threshold delta must be positive");
  TimeSeries out = s;
  const auto& x = s.values;
  const std::size_t n = x.size();
  std::size_t count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!(x[t] > delta) || n < 2) continue;
    if (t == 0) {
      out.values[t] = x[1];
    } else if (t == n - 1) {
      out.values[t] = x[n - 2];
    } else {
      out.values[t] = 0.5 * (x[t - 1] + x[t + 1]);
    }
    ++count;
  }
  if (replaced != nullptr) *replaced = count;
  return out;
}

double mean(std::span<const double> xs) {
  if (xs.empty()) throw SizeError("mean of an empty sequence");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(std::span<const double> xs) {
  if (xs.size() < 2) throw SizeError("sample standard deviation needs at least 2 values");
  const double mu = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

SplitSeries split_and_normalize(const TimeSeries& s, const SplitRatios& ratios) {
  const double total = ratios.train + ratios.val + ratios.test;
  if (ratios.train <= 0.0 || ratios.val <= 0.0 || ratios.test <= 0.0 || std::abs(total - 1.0) > 1e-9) {
    throw ConfigError("split ratios must be positive and sum to 1");
  }
  const std::size_t T = s.size();
  if (T < 10) throw SizeError("split needs at least 10 samples, got " + std::to_string(T));
  const std::size_t b1 = floor_index(ratios.train, T);
  const std::size_t b2 = floor_index(ratios.train + ratios.val, T);
  if (b1 < 2 || b2 <= b1 || b2 >= T) {
    throw SizeError("series of length " + std::to_string(T) + " leaves an empty split segment");
  }
  const std::span<const double> train(s.values.data(), b1);
  const double mu = mean(train);
  const double sigma = sample_std(train);
  const bool constant = std::all_of(train.begin(), train.end(), [&](double v) { return v == train.front(); });
  if (constant || !(sigma > 0.0)) throw DegenerateSeriesError("training segment is constant (standard deviation 0)");

  SplitSeries out;
  out.train_mean = mu;
  out.train_std = sigma;
  out.train = segment(s, 0, b1, mu, sigma);
  out.val = segment(s, b1, b2, mu, sigma);
  out.test = segment(s, b2, T, mu, sigma);
  return out;
}

WindowDataset make_windows(std::span<const double> seg, std::size_t lookback, std::size_t horizon) {
  if (lookback == 0 || horizon == 0) throw ConfigError("lookback and horizon must be positive");
  const std::size_t need = lookback + horizon;
  if (seg.size() < need) {
    throw SizeError("segment of length " + std::to_string(seg.size()) + " is too short for windows; need at least L+O = " +
                    std::to_string(need));
  }
  const std::size_t n = seg.size() - need + 1;
  WindowDataset ds;
  ds.lookback = lookback;
  ds.horizon = horizon;
  ds.inputs.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(lookback));
  ds.targets.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(horizon));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (std::size_t j = 0; j < lookback; ++j) ds.inputs(r, static_cast<Eigen::Index>(j)) = seg[i + j];
    for (std::size_t j = 0; j < horizon; ++j) {
      ds.targets(r, static_cast<Eigen::Index>(j)) = seg[i + lookback + j];
    }
  }
  return ds;
}

TimeSeries downsample(const TimeSeries& s, std::size_t k) {
  if (k == 0) throw ConfigError("downsample factor must be at least 1");
  if (k > s.size()) {
    throw SizeError("downsample factor " + std::to_string(k) + " exceeds series length " + std::to_string(s.size()));
  }
  TimeSeries out;
  out.origin_label = s.origin_label;
  out.sample_interval = s.sample_interval * static_cast<double>(k);
  const std::size_t blocks = s.size() / k;
  out.values.reserve(blocks);
  for (std::size_t j = 0; j < blocks; ++j) {
    double sum = 0.0;
    for (std::size_t i = j * k; i < (j + 1) * k; ++i) sum += s.values[i];
    out.values.push_back(sum / static_cast<double>(k));
  }
  return out;
}

TimeSeries difference(const TimeSeries& s) {
  if (s.size() < 2) throw SizeError("differencing needs at least 2 samples");
  TimeSeries out;
  out.origin_label = s.origin_label;
  out.sample_interval = s.sample_interval;
  out.values.resize(s.size() - 1);
  for (std::size_t t = 0; t + 1 < s.size(); ++t) out.values[t] = s.values[t + 1] - s.values[t];
  return out;
}

}  // namespace emf::data
