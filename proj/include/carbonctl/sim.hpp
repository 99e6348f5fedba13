#pragma once

// Discrete-time replay of one job's workload against a carbon-intensity
// trace under a chosen policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "carbonctl/fleet.hpp"
#include "carbonctl/policy.hpp"
#include "carbonctl/provider.hpp"
#include "carbonctl/synth.hpp"
#include "carbonctl/traces.hpp"

namespace carbonctl {

class SimError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class PolicyKind { cc_efficiency, cc_performance, vertical_only, suspend_resume, carbon_agnostic };

inline constexpr PolicyKind kAllPolicies[] = {PolicyKind::cc_efficiency, PolicyKind::cc_performance,
                                              PolicyKind::vertical_only, PolicyKind::suspend_resume,
                                              PolicyKind::carbon_agnostic};

inline std::string_view to_string(PolicyKind k) {
  switch (k) {
  case PolicyKind::cc_efficiency:
    return "cc-efficiency";
  case PolicyKind::cc_performance:
    return "cc-performance";
  case PolicyKind::vertical_only:
    return "vertical-only";
  case PolicyKind::suspend_resume:
    return "suspend-resume";
  case PolicyKind::carbon_agnostic:
    return "carbon-agnostic";
  }
  return "?";
}

inline std::optional<PolicyKind> parse_policy_kind(std::string_view name) {
  for (auto k : kAllPolicies)
    if (to_string(k) == name)
      return k;
  return std::nullopt;
}

enum class MigrationMode { stop_and_copy, live };

/// Migration time d = c0 + c1 * memory. Stop-and-copy is downtime; live
/// migration keeps serving and pays for both servers' base power instead.
struct MigrationModel {
  double c0_s = 10.0;
  double c1_s_per_gb = 15.0;
  MigrationMode mode = MigrationMode::stop_and_copy;

  double duration_s(double memory_gb) const { return c0_s + c1_s_per_gb * memory_gb; }
};

/// Source of the demand figure the policy sees each step.
enum class DemandSignal {
  trace,   // the replayed demand itself
  inferred // fleet::infer_demand over the utilization observed under the current allocation
};

struct SimConfig {
  Seconds step = kFiveMinutes;
  Fleet fleet = default_fleet();
  ContainerConfig container;
  PolicyKind policy = PolicyKind::cc_efficiency;
  MigrationModel migration;
  double demand_scale = 1.0;
  std::map<std::string, double> availability; // server id -> provisioning probability
  std::uint64_t seed = 0;
  bool suspend_baseload_attributed = true;
  DemandSignal demand_signal = DemandSignal::trace;
};

inline void validate(const SimConfig &cfg) {
  if (cfg.step <= Seconds{0})
    throw SimError("step must be positive");
  validate(cfg.container);
  if (!(cfg.demand_scale > 0.0))
    throw SimError("demand_scale must be positive");
  if (!(cfg.migration.c0_s >= 0.0) || !(cfg.migration.c1_s_per_gb >= 0.0))
    throw SimError("migration coefficients must be non-negative");
  for (const auto &[id, p] : cfg.availability) {
    if (!cfg.fleet.find(id))
      throw SimError("availability names unknown server '" + id + "'");
    if (!(p >= 0.0 && p <= 1.0))
      throw SimError("availability of '" + id + "' must lie in [0, 1]");
  }
}

struct StepRecord {
  Instant t;
  double demand = 0.0;
  std::size_t server = 0;
  double quota = 0.0;
  Status status = Status::running;
  double utilization = 0.0; // time-averaged over the step
  double power_w = 0.0;
  double intensity = 0.0;
  double emissions_g_per_hr = 0.0;
  double granted = 0.0;
  double throttle = 0.0; // baseline units
  double migration_s = 0.0; // migration time spent inside this step
  Action action;
};

struct SimResult {
  std::string job_id;
  PolicyKind policy = PolicyKind::cc_efficiency;
  Seconds step = kFiveMinutes;
  std::vector<StepRecord> records;
};

/// Deterministic per (seed, step, server) draw against `probability`.
inline bool provision(std::uint64_t seed, std::size_t step_index, std::size_t server_index, double probability) {
  if (probability >= 1.0)
    return true;
  if (probability <= 0.0)
    return false;
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step_index), static_cast<std::uint32_t>(step_index >> 32),
                    static_cast<std::uint32_t>(server_index)};
  std::mt19937_64 rng(seq);
  return detail::unit_uniform(rng) < probability;
}

inline std::vector<bool> provision_all(const SimConfig &cfg, std::size_t step_index) {
  std::vector<bool> out(cfg.fleet.size(), true);
  for (std::size_t i = 0; i < cfg.fleet.size(); ++i) {
    const auto it = cfg.availability.find(cfg.fleet[i].id);
    if (it != cfg.availability.end())
      out[i] = provision(cfg.seed, step_index, i, it->second);
  }
  return out;
}

/// Carbon-agnostic placement: baseline server, quota 1, always running.
inline Projection baseline_carbon_agnostic(double demand, const ServerSpec &baseline) {
  return project(demand, baseline, 1.0);
}

/// Suspend-resume scheduling on the baseline server: run unthrottled while
/// the projected rate stays within the target, otherwise stay suspended.
inline Status baseline_suspend_resume(double demand, double intensity, const ServerSpec &baseline, double c_target) {
  return projected_emissions(baseline, demand, 1.0, intensity) <= c_target ? Status::running : Status::suspended;
}

namespace detail {

/// Mean cpu_avg over [t, t + step); the sample containing t when step is finer.
inline double demand_at(const WorkloadTrace &w, Instant t, Seconds step) {
  const auto first = static_cast<std::size_t>((t - w.start()) / w.resolution);
  if (step <= w.resolution)
    return w.samples.at(first).cpu_avg;
  const auto count = static_cast<std::size_t>(step / w.resolution);
  double sum = 0.0;
  for (std::size_t k = 0; k < count; ++k)
    sum += w.samples.at(first + k).cpu_avg;
  return sum / static_cast<double>(count);
}

inline double memory_at(const WorkloadTrace &w, Instant t, const ContainerConfig &c) {
  if (c.memory_gb)
    return *c.memory_gb;
  return w.samples.at(static_cast<std::size_t>((t - w.start()) / w.resolution)).mem_gb;
}

} // namespace detail

/// Replays `workload` against `provider` over [start, start + steps * cfg.step).
inline SimResult run(const WorkloadTrace &workload, CarbonProvider &provider, Instant start, std::size_t steps,
                     const SimConfig &cfg) {
  validate(cfg);
  if (workload.samples.empty())
    throw SimError("empty workload trace");
  if (cfg.step % workload.resolution != Seconds{0} && workload.resolution % cfg.step != Seconds{0})
    throw SimError("step must divide the workload resolution or be a multiple of it");

  const auto &fleet = cfg.fleet;
  const auto baseline = fleet.baseline_index();
  const double step_s = static_cast<double>(cfg.step.count());
  const double c_target = cfg.container.c_target;

  ContainerConfig container = cfg.container;
  container.variant = cfg.policy == PolicyKind::cc_performance ? Variant::performance : Variant::efficiency;

  SimResult result{workload.job_id, cfg.policy, cfg.step, {}};
  result.records.reserve(steps);

  ContainerState state{baseline, 1.0, Status::running, 0.0, std::nullopt};
  std::size_t migration_source = baseline;

  for (std::size_t k = 0; k < steps; ++k) {
    const Instant t = start + static_cast<long>(k) * cfg.step;
    const double demand = detail::demand_at(workload, t, cfg.step) * cfg.demand_scale;
    const double intensity = provider.intensity_at(t);

    StepRecord rec;
    rec.t = t;
    rec.demand = demand;
    rec.intensity = intensity;

    // Decide.
    Action action = Action::noop("migration in progress");
    if (state.status != Status::migrating) {
      switch (cfg.policy) {
      case PolicyKind::carbon_agnostic:
        action = Action::noop("carbon-agnostic");
        break;
      case PolicyKind::suspend_resume: {
        const auto want = baseline_suspend_resume(demand, intensity, fleet[baseline], c_target);
        if (want == state.status)
          action = Action::noop(want == Status::running ? "within target" : "over target");
        else if (want == Status::suspended)
          action = Action::suspend("projected rate over target");
        else
          action = Action::resume(1.0, "projected rate within target");
        break;
      }
      case PolicyKind::cc_efficiency:
      case PolicyKind::cc_performance:
      case PolicyKind::vertical_only: {
        double seen = demand;
        if (cfg.demand_signal == DemandSignal::inferred) {
          const double q = state.status == Status::suspended ? 0.0 : state.quota;
          seen = infer_demand(project(demand, fleet[state.server], q).utilization, fleet[state.server], q);
        }
        const PolicyInputs in{seen, intensity, t, fleet, provision_all(cfg, k)};
        action = cfg.policy == PolicyKind::vertical_only ? step_vertical_only(container, state, in)
                                                         : decide(container, state, in);
        break;
      }
      }
    }

    // Apply.
    switch (action.kind) {
    case ActionKind::noop:
      break;
    case ActionKind::set_quota:
      state.quota = action.quota;
      break;
    case ActionKind::suspend:
      state.status = Status::suspended;
      state.quota = 0.0;
      break;
    case ActionKind::resume:
      state.status = Status::running;
      state.quota = action.quota;
      break;
    case ActionKind::migrate:
      migration_source = state.server;
      state.server = action.target;
      state.quota = action.quota;
      state.last_migration_at = t;
      state.migration_remaining_s = cfg.migration.duration_s(detail::memory_at(workload, t, container));
      state.status = Status::migrating;
      break;
    }

    // Account.
    const auto &server = fleet[state.server];
    rec.server = state.server;
    rec.quota = state.quota;
    if (state.status == Status::suspended) {
      rec.status = Status::suspended;
      rec.power_w = cfg.suspend_baseload_attributed ? server.base_power_w : 0.0;
      rec.throttle = demand;
    } else {
      const auto proj = project(demand, server, state.quota);
      double moving_s = 0.0;
      if (state.status == Status::migrating) {
        moving_s = std::min(state.migration_remaining_s, step_s);
        state.migration_remaining_s -= moving_s;
        if (state.migration_remaining_s <= 0.0) {
          state.migration_remaining_s = 0.0;
          state.status = Status::running;
        }
      }
      const double f = moving_s / step_s;
      const double source_base = fleet[migration_source].base_power_w;
      rec.migration_s = moving_s;
      if (cfg.migration.mode == MigrationMode::stop_and_copy) {
        rec.status = f >= 1.0 ? Status::migrating : Status::running;
        rec.power_w = f * source_base + (1.0 - f) * proj.power_w;
        rec.utilization = (1.0 - f) * proj.utilization;
        rec.granted = (1.0 - f) * proj.granted;
      } else {
        rec.status = Status::running;
        rec.power_w = proj.power_w + f * source_base;
        rec.utilization = proj.utilization;
        rec.granted = proj.granted;
      }
      rec.throttle = demand - rec.granted;
    }
    rec.emissions_g_per_hr = emissions_rate(rec.power_w, intensity);
    rec.action = std::move(action);
    result.records.push_back(std::move(rec));
  }
  return result;
}

/// Steps of `step` fully covered by both traces, starting at the later start.
inline std::pair<Instant, std::size_t> overlap(const WorkloadTrace &w, const CarbonTrace &c, Seconds step) {
  if (w.samples.empty() || c.samples.empty())
    throw SimError("empty trace");
  const Instant start = std::max(w.start(), c.start());
  const Instant end = std::min(w.end(), c.end());
  if (end - start < step)
    throw SimError("workload and carbon traces do not overlap for a full step");
  return {start, static_cast<std::size_t>((end - start) / step)};
}

inline SimResult run(const WorkloadTrace &workload, const CarbonTrace &carbon, const SimConfig &cfg) {
  const auto [start, steps] = overlap(workload, carbon, cfg.step);
  TraceCarbonProvider provider(carbon);
  return run(workload, provider, start, steps, cfg);
}

} // namespace carbonctl
