#pragma once

// Per-run summaries and cross-job aggregation for policy comparisons.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "carbonctl/sim.hpp"
#include "carbonctl/traces.hpp"
#include "json.hpp"

namespace carbonctl {

struct Summary {
  double avg_emissions_g_per_hr = 0.0;
  double total_emissions_g = 0.0;
  double throttling_pct = 0.0; // percent of baseline capacity
  double suspended_fraction = 0.0;
  std::size_t migration_count = 0;
  double violation_fraction = 0.0; // steps with emissions over c_target
  std::map<double, double> time_on_server; // capacity_multiple -> fraction of steps
};

inline Summary summarize(const SimResult &result, const SimConfig &cfg) {
  if (result.records.empty())
    throw std::invalid_argument("cannot summarize an empty run");
  const double hours_per_step = to_hours(result.step);
  const double n = static_cast<double>(result.records.size());

  Summary s;
  double throttle_sum = 0.0;
  std::size_t suspended = 0, violations = 0;
  for (const auto &cap : cfg.fleet.servers())
    s.time_on_server[cap.capacity_multiple] = 0.0;
  for (const auto &r : result.records) {
    s.total_emissions_g += r.emissions_g_per_hr * hours_per_step;
    throttle_sum += r.throttle;
    if (r.status == Status::suspended)
      ++suspended;
    if (r.emissions_g_per_hr > cfg.container.c_target)
      ++violations;
    if (r.action.kind == ActionKind::migrate)
      ++s.migration_count;
    s.time_on_server[cfg.fleet[r.server].capacity_multiple] += 1.0;
  }
  s.avg_emissions_g_per_hr = s.total_emissions_g / (n * hours_per_step);
  s.throttling_pct = 100.0 * throttle_sum / n;
  s.suspended_fraction = static_cast<double>(suspended) / n;
  s.violation_fraction = static_cast<double>(violations) / n;
  for (auto &[cap, frac] : s.time_on_server)
    frac /= n;
  return s;
}

inline std::string capacity_label(double capacity_multiple) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%gx", capacity_multiple);
  return buf;
}

/// Flat snake_case object; time on each server size appears as `time_on_server_<N>x`.
inline nlohmann::ordered_json to_json(const Summary &s) {
  nlohmann::ordered_json j;
  j["avg_emissions_g_per_hr"] = s.avg_emissions_g_per_hr;
  j["total_emissions_g"] = s.total_emissions_g;
  j["throttling_pct"] = s.throttling_pct;
  j["suspended_fraction"] = s.suspended_fraction;
  j["migration_count"] = s.migration_count;
  j["violation_fraction"] = s.violation_fraction;
  for (const auto &[cap, frac] : s.time_on_server)
    j["time_on_server_" + capacity_label(cap)] = frac;
  return j;
}

/// One job's outcome under one (policy, target) cell of an experiment.
struct RunSummary {
  std::string policy;
  double target = 0.0;
  std::string job_id;
  Summary summary;
};

struct ComparisonRow {
  std::string policy;
  double target = 0.0;
  double mean_emissions = 0.0;
  double std_emissions = 0.0;
  double mean_throttle_pct = 0.0;
  double std_throttle_pct = 0.0;
  std::size_t jobs = 0;
};

namespace detail {

using CellKey = std::pair<std::string, double>;

inline std::map<CellKey, std::vector<const RunSummary *>> group_cells(const std::vector<RunSummary> &runs) {
  std::map<CellKey, std::vector<const RunSummary *>> cells;
  for (const auto &r : runs)
    cells[{r.policy, r.target}].push_back(&r);

  std::optional<std::set<std::string>> jobs;
  for (auto &[key, members] : cells) {
    std::set<std::string> ids;
    for (const auto *m : members)
      if (!ids.insert(m->job_id).second)
        throw std::invalid_argument("job '" + m->job_id + "' appears twice for policy " + key.first);
    if (jobs && *jobs != ids)
      throw std::invalid_argument("policy " + key.first + " was run on a different job set");
    jobs = std::move(ids);
    // fixed order so floating-point sums do not depend on input order
    std::sort(members.begin(), members.end(), [](auto *a, auto *b) { return a->job_id < b->job_id; });
  }
  return cells;
}

} // namespace detail

/// Mean and population standard deviation per (policy, target), sorted by key.
inline std::vector<ComparisonRow> compare(const std::vector<RunSummary> &runs) {
  std::vector<ComparisonRow> rows;
  for (const auto &[key, members] : detail::group_cells(runs)) {
    std::vector<double> emissions, throttle;
    for (const auto *m : members) {
      emissions.push_back(m->summary.avg_emissions_g_per_hr);
      throttle.push_back(m->summary.throttling_pct);
    }
    const auto e = moments(emissions);
    const auto t = moments(throttle);
    rows.push_back({key.first, key.second, e.mean, e.stddev, t.mean, t.stddev, members.size()});
  }
  return rows;
}

struct ServerTimeRow {
  std::string policy;
  double target = 0.0;
  double capacity_multiple = 0.0;
  double fraction = 0.0; // mean over jobs
};

inline std::vector<ServerTimeRow> server_time_distribution(const std::vector<RunSummary> &runs) {
  std::vector<ServerTimeRow> rows;
  for (const auto &[key, members] : detail::group_cells(runs)) {
    std::map<double, double> acc;
    for (const auto *m : members)
      for (const auto &[cap, frac] : m->summary.time_on_server)
        acc[cap] += frac;
    for (const auto &[cap, total] : acc)
      rows.push_back({key.first, key.second, cap, total / static_cast<double>(members.size())});
  }
  return rows;
}

inline constexpr const char *kComparisonHeader =
    "policy,target_g_per_hr,mean_emissions,std_emissions,mean_throttle_pct,std_throttle_pct";

namespace detail {
inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}
} // namespace detail

inline void write_comparison_csv(std::ostream &out, const std::vector<ComparisonRow> &rows) {
  out << kComparisonHeader << '\n';
  for (const auto &r : rows)
    out << r.policy << ',' << detail::format_real(r.target) << ',' << detail::fmt6(r.mean_emissions) << ','
        << detail::fmt6(r.std_emissions) << ',' << detail::fmt6(r.mean_throttle_pct) << ','
        << detail::fmt6(r.std_throttle_pct) << '\n';
}

inline void write_server_time_csv(std::ostream &out, const std::vector<ServerTimeRow> &rows) {
  out << "variant,target_g_per_hr,capacity_multiple,fraction\n";
  for (const auto &r : rows)
    out << r.policy << ',' << detail::format_real(r.target) << ',' << detail::format_real(r.capacity_multiple) << ','
        << detail::fmt6(r.fraction) << '\n';
}

inline constexpr const char *kRecordsHeader =
    "t,demand,server_id,capacity_multiple,quota,cores,status,utilization,power_w,intensity,emissions_g_per_hr,"
    "target_g_per_hr,granted,throttle,migration_s,action,reason";

/// One row per step; `cores` is the quota expressed in whole cores of the current server.
inline void write_records_csv(std::ostream &out, const SimResult &result, const SimConfig &cfg) {
  out << kRecordsHeader << '\n';
  for (const auto &r : result.records) {
    const auto &server = cfg.fleet[r.server];
    out << format_iso8601(r.t) << ',' << detail::format_real(r.demand) << ',' << server.id << ','
        << detail::format_real(server.capacity_multiple) << ',' << detail::format_real(r.quota) << ','
        << detail::format_real(r.quota * server.cores) << ',' << to_string(r.status) << ','
        << detail::format_real(r.utilization) << ',' << detail::format_real(r.power_w) << ','
        << detail::format_real(r.intensity) << ',' << detail::format_real(r.emissions_g_per_hr) << ','
        << detail::format_real(cfg.container.c_target) << ',' << detail::format_real(r.granted) << ','
        << detail::format_real(r.throttle) << ',' << detail::format_real(r.migration_s) << ','
        << describe(r.action, cfg.fleet) << ',' << r.action.reason << '\n';
  }
}

} // namespace carbonctl
