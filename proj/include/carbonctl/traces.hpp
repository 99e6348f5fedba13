#pragma once

// Carbon-intensity and workload traces: CSV parsing, serialization, and the
// summary statistics used to characterize regions and jobs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "carbonctl/time.hpp"

namespace carbonctl {

class TraceError : public std::runtime_error {
public:
  explicit TraceError(const std::string &what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  /// 1-based CSV line of the offending row, or 0 when not tied to a row.
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class StatsError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

struct CarbonSample {
  Instant timestamp;
  double intensity = 0.0; // g·CO2e/kWh

  friend bool operator==(const CarbonSample &, const CarbonSample &) = default;
};

struct CarbonTrace {
  std::string region;
  std::vector<CarbonSample> samples;
  Seconds resolution = kHour;

  Instant start() const { return samples.front().timestamp; }
  Instant end() const { return samples.back().timestamp + resolution; }

  std::vector<double> intensities() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto &s : samples)
      out.push_back(s.intensity);
    return out;
  }
};

struct WorkloadSample {
  Instant timestamp;
  double cpu_avg = 0.0; // fractions of baseline capacity
  double cpu_min = 0.0;
  double cpu_max = 0.0;
  double mem_gb = 0.0;

  friend bool operator==(const WorkloadSample &, const WorkloadSample &) = default;
};

struct WorkloadTrace {
  std::string job_id;
  std::vector<WorkloadSample> samples;
  Seconds resolution = kFiveMinutes;

  Instant start() const { return samples.front().timestamp; }
  Instant end() const { return samples.back().timestamp + resolution; }

  std::vector<double> cpu_avg() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto &s : samples)
      out.push_back(s.cpu_avg);
    return out;
  }
};

enum class GapFill { none, forward };

struct ParseOptions {
  /// Expected spacing between consecutive samples.
  std::optional<Seconds> resolution;
  GapFill fill = GapFill::none;
};

inline constexpr std::string_view kCarbonHeader = "timestamp,region,carbon_intensity_gco2_per_kwh";
inline constexpr std::string_view kWorkloadHeader = "timestamp,job_id,cpu_avg_pct,cpu_min_pct,cpu_max_pct,mem_gb";

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos)
      break;
    pos = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_real(std::string_view s) {
  if (s.empty())
    return std::nullopt;
  if (s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v))
    return std::nullopt;
  return v;
}

inline std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Row {
  std::size_t line;
  std::vector<std::string_view> fields;
};

/// Reads a CSV body, checking the header. Returned views point into `storage`.
inline std::vector<Row> read_rows(std::istream &in, std::string_view header, std::vector<std::string> &storage) {
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  storage.clear();
  std::vector<std::size_t> line_numbers;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    if (!saw_header) {
      if (trim(line) != header)
        throw TraceError("expected header '" + std::string(header) + "'", line_no);
      saw_header = true;
      continue;
    }
    storage.push_back(line);
    line_numbers.push_back(line_no);
  }
  if (!saw_header)
    throw TraceError("missing header '" + std::string(header) + "'");

  std::vector<Row> rows;
  rows.reserve(storage.size());
  for (std::size_t i = 0; i < storage.size(); ++i)
    rows.push_back({line_numbers[i], split_csv(storage[i])});
  return rows;
}

template <typename Sample>
std::vector<Sample> check_spacing(std::vector<std::pair<std::size_t, Sample>> rows, Seconds resolution,
                                  GapFill fill) {
  std::vector<Sample> out;
  out.reserve(rows.size());
  for (auto &[line, sample] : rows) {
    if (!out.empty()) {
      const auto prev = out.back().timestamp;
      if (sample.timestamp <= prev)
        throw TraceError("timestamps must be strictly increasing", line);
      const auto gap = sample.timestamp - prev;
      if (gap != resolution) {
        if (fill == GapFill::forward && gap % resolution == Seconds{0}) {
          for (auto t = prev + resolution; t < sample.timestamp; t += resolution) {
            Sample copy = out.back();
            copy.timestamp = t;
            out.push_back(copy);
          }
        } else {
          throw TraceError("spacing of " + std::to_string(gap.count()) + "s does not match resolution " +
                               std::to_string(resolution.count()) + "s",
                           line);
        }
      }
    }
    out.push_back(sample);
  }
  return out;
}

inline CarbonSample parse_carbon_row(const Row &row, std::string &region) {
  if (row.fields.size() != 3)
    throw TraceError("expected 3 columns, got " + std::to_string(row.fields.size()), row.line);
  const auto ts = parse_iso8601(row.fields[0]);
  if (!ts)
    throw TraceError("bad timestamp '" + std::string(row.fields[0]) + "'", row.line);
  if (row.fields[1].empty())
    throw TraceError("empty region", row.line);
  const auto value = parse_real(row.fields[2]);
  if (!value)
    throw TraceError("bad carbon intensity '" + std::string(row.fields[2]) + "'", row.line);
  if (*value < 0.0)
    throw TraceError("carbon intensity must be non-negative, got " + std::string(row.fields[2]), row.line);
  region = std::string(row.fields[1]);
  return {*ts, *value};
}

inline WorkloadSample parse_workload_row(const Row &row, std::string &job) {
  if (row.fields.size() != 6)
    throw TraceError("expected 6 columns, got " + std::to_string(row.fields.size()), row.line);
  const auto ts = parse_iso8601(row.fields[0]);
  if (!ts)
    throw TraceError("bad timestamp '" + std::string(row.fields[0]) + "'", row.line);
  if (row.fields[1].empty())
    throw TraceError("empty job id", row.line);

  double values[4];
  static constexpr const char *names[] = {"cpu_avg_pct", "cpu_min_pct", "cpu_max_pct", "mem_gb"};
  for (int i = 0; i < 4; ++i) {
    const auto v = parse_real(row.fields[2 + i]);
    if (!v)
      throw TraceError(std::string("bad ") + names[i] + " '" + std::string(row.fields[2 + i]) + "'", row.line);
    if (*v < 0.0)
      throw TraceError(std::string(names[i]) + " must be non-negative", row.line);
    values[i] = *v;
  }
  WorkloadSample s{*ts, values[0] / 100.0, values[1] / 100.0, values[2] / 100.0, values[3]};
  if (s.cpu_min > s.cpu_max)
    throw TraceError("cpu_min_pct exceeds cpu_max_pct", row.line);
  if (s.cpu_avg < s.cpu_min || s.cpu_avg > s.cpu_max)
    throw TraceError("cpu_avg_pct outside [cpu_min_pct, cpu_max_pct]", row.line);
  job = std::string(row.fields[1]);
  return s;
}

} // namespace detail

/// All regions in a carbon CSV, one trace per region, ordered by region id.
inline std::vector<CarbonTrace> parse_carbon_traces(std::istream &in, const ParseOptions &opts = {}) {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(in, kCarbonHeader, storage);

  std::map<std::string, std::vector<std::pair<std::size_t, CarbonSample>>> by_region;
  std::string region;
  for (const auto &row : rows) {
    auto sample = detail::parse_carbon_row(row, region);
    by_region[region].emplace_back(row.line, sample);
  }
  if (by_region.empty())
    throw TraceError("no carbon samples");

  const auto resolution = opts.resolution.value_or(kHour);
  std::vector<CarbonTrace> out;
  for (auto &[name, samples] : by_region)
    out.push_back({name, detail::check_spacing(std::move(samples), resolution, opts.fill), resolution});
  return out;
}

/// A single region's trace. Without a filter the CSV must hold exactly one region.
inline CarbonTrace parse_carbon_trace(std::istream &in, const std::optional<std::string> &region_filter = {},
                                      const ParseOptions &opts = {}) {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(in, kCarbonHeader, storage);

  std::vector<std::pair<std::size_t, CarbonSample>> kept;
  std::optional<std::string> seen;
  std::string region;
  for (const auto &row : rows) {
    auto sample = detail::parse_carbon_row(row, region);
    if (region_filter) {
      if (region != *region_filter)
        continue;
    } else if (seen && *seen != region) {
      throw TraceError("multiple regions in trace; a region filter is required", row.line);
    }
    seen = region;
    kept.emplace_back(row.line, sample);
  }
  if (kept.empty())
    throw TraceError(region_filter ? "no samples for region '" + *region_filter + "'" : "no carbon samples");

  const auto resolution = opts.resolution.value_or(kHour);
  return {*seen, detail::check_spacing(std::move(kept), resolution, opts.fill), resolution};
}

/// All jobs in a workload CSV, ordered by job id.
inline std::vector<WorkloadTrace> parse_workload_traces(std::istream &in, const ParseOptions &opts = {}) {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(in, kWorkloadHeader, storage);

  std::map<std::string, std::vector<std::pair<std::size_t, WorkloadSample>>> by_job;
  std::string job;
  for (const auto &row : rows) {
    auto sample = detail::parse_workload_row(row, job);
    by_job[job].emplace_back(row.line, sample);
  }
  if (by_job.empty())
    throw TraceError("no workload samples");

  const auto resolution = opts.resolution.value_or(kFiveMinutes);
  std::vector<WorkloadTrace> out;
  for (auto &[name, samples] : by_job)
    out.push_back({name, detail::check_spacing(std::move(samples), resolution, opts.fill), resolution});
  return out;
}

inline WorkloadTrace parse_workload_trace(std::istream &in, const std::optional<std::string> &job_filter = {},
                                          const ParseOptions &opts = {}) {
  std::vector<std::string> storage;
  const auto rows = detail::read_rows(in, kWorkloadHeader, storage);

  std::vector<std::pair<std::size_t, WorkloadSample>> kept;
  std::optional<std::string> seen;
  std::string job;
  for (const auto &row : rows) {
    auto sample = detail::parse_workload_row(row, job);
    if (job_filter) {
      if (job != *job_filter)
        continue;
    } else if (seen && *seen != job) {
      throw TraceError("multiple jobs in trace; a job filter is required", row.line);
    }
    seen = job;
    kept.emplace_back(row.line, sample);
  }
  if (kept.empty())
    throw TraceError(job_filter ? "no samples for job '" + *job_filter + "'" : "no workload samples");

  const auto resolution = opts.resolution.value_or(kFiveMinutes);
  return {*seen, detail::check_spacing(std::move(kept), resolution, opts.fill), resolution};
}

inline void write_carbon_header(std::ostream &out) { out << kCarbonHeader << '\n'; }

inline void write_carbon_rows(std::ostream &out, const CarbonTrace &trace) {
  for (const auto &s : trace.samples)
    out << format_iso8601(s.timestamp) << ',' << trace.region << ',' << detail::format_real(s.intensity) << '\n';
}

inline void write_workload_header(std::ostream &out) { out << kWorkloadHeader << '\n'; }

inline void write_workload_rows(std::ostream &out, const WorkloadTrace &trace) {
  for (const auto &s : trace.samples)
    out << format_iso8601(s.timestamp) << ',' << trace.job_id << ',' << detail::format_real(s.cpu_avg * 100.0) << ','
        << detail::format_real(s.cpu_min * 100.0) << ',' << detail::format_real(s.cpu_max * 100.0) << ','
        << detail::format_real(s.mem_gb) << '\n';
}

// ---------------------------------------------------------------------------
// Statistics

struct Moments {
  double mean = 0.0;
  double stddev = 0.0; // population
};

struct TraceStats {
  double mean = 0.0;
  double stddev = 0.0;
  double cov = 0.0;
};

inline Moments moments(std::span<const double> series) {
  if (series.empty())
    throw StatsError("statistics of an empty series");
  const double n = static_cast<double>(series.size());
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : series)
    ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

/// Mean, population standard deviation, and coefficient of variation.
inline TraceStats compute_stats(std::span<const double> series) {
  const auto m = moments(series);
  if (!(m.mean > 0.0))
    throw StatsError("coefficient of variation undefined for non-positive mean");
  return {m.mean, m.stddev, m.stddev / m.mean};
}

enum class CovMode { whole_series, daily_averaged };

inline const char *to_string(CovMode m) { return m == CovMode::whole_series ? "whole" : "daily"; }

struct RegionReportRow {
  std::string region;
  double mean = 0.0;
  double cov = 0.0;
};

/// Per-region mean and CoV, ordered by increasing CoV (ties by region id).
///
/// Daily mode splits each trace into consecutive 24-sample days, takes the CoV
/// of each day, and averages across days; a trailing partial day is ignored.
/// The reported mean is over all samples in either mode.
inline std::vector<RegionReportRow> carbon_region_report(std::span<const CarbonTrace> traces, CovMode mode) {
  std::vector<RegionReportRow> out;
  for (const auto &trace : traces) {
    if (trace.resolution != kHour)
      throw TraceError("region '" + trace.region + "' is not hourly");
    const auto values = trace.intensities();
    const auto whole = moments(values);
    double cov = 0.0;
    if (mode == CovMode::whole_series) {
      cov = compute_stats(values).cov;
    } else {
      const std::size_t days = values.size() / 24;
      if (days == 0)
        throw TraceError("region '" + trace.region + "' is shorter than one day");
      double sum = 0.0;
      for (std::size_t d = 0; d < days; ++d)
        sum += compute_stats(std::span<const double>(values).subspan(d * 24, 24)).cov;
      cov = sum / static_cast<double>(days);
    }
    out.push_back({trace.region, whole.mean, cov});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    return a.cov < b.cov || (a.cov == b.cov && a.region < b.region);
  });
  return out;
}

struct CovBucket {
  double lower = 0.0;
  std::optional<double> upper; // empty for the open last bucket
  std::size_t count = 0;
  double percent = 0.0;
};

struct CovHistogram {
  std::vector<CovBucket> buckets;
  std::size_t undefined_count = 0; // jobs whose CPU series has zero mean
  double undefined_percent = 0.0;
  std::size_t total = 0;
};

/// Buckets are half-open: [0, e1), [e1, e2), ..., [en, inf).
inline CovHistogram workload_cov_histogram(std::span<const WorkloadTrace> traces, std::span<const double> edges) {
  if (traces.empty())
    throw StatsError("histogram of zero jobs");
  if (edges.empty() || !(edges.front() > 0.0))
    throw StatsError("bucket edges must be non-empty and positive");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1]))
      throw StatsError("bucket edges must be strictly increasing");

  CovHistogram h;
  h.total = traces.size();
  double lower = 0.0;
  for (double e : edges) {
    h.buckets.push_back({lower, e, 0, 0.0});
    lower = e;
  }
  h.buckets.push_back({lower, std::nullopt, 0, 0.0});

  for (const auto &trace : traces) {
    const auto series = trace.cpu_avg();
    const auto m = moments(series);
    if (!(m.mean > 0.0)) {
      ++h.undefined_count;
      continue;
    }
    const double cov = m.stddev / m.mean;
    const auto idx = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), cov) - edges.begin());
    ++h.buckets[idx].count;
  }

  const double n = static_cast<double>(h.total);
  for (auto &b : h.buckets)
    b.percent = 100.0 * static_cast<double>(b.count) / n;
  h.undefined_percent = 100.0 * static_cast<double>(h.undefined_count) / n;
  return h;
}

} // namespace carbonctl
