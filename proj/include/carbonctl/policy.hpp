#pragma once

// Carbon-target enforcement: a pure decision function from (config, state,
// inputs) to the next action. Vertical scaling is tried before migration and
// suspension is the last resort; see step_general for the exact order.

#include <cmath>
#include <cstdio>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carbonctl/fleet.hpp"
#include "carbonctl/time.hpp"

namespace carbonctl {

enum class Variant { efficiency, performance };

enum class QuotaGranularity { cores, continuous };

struct ContainerConfig {
  double c_target = 0.0; // g·CO2e/hr
  double epsilon = 0.05; // fraction of c_target
  Variant variant = Variant::efficiency;
  std::optional<double> memory_gb; // migration footprint; the trace's value when unset
  Seconds min_dwell = 2 * kFiveMinutes;
  QuotaGranularity quota_granularity = QuotaGranularity::cores;

  /// Emissions level at which enforcement engages.
  double bound() const { return (1.0 - epsilon) * c_target; }
};

inline void validate(const ContainerConfig &cfg) {
  if (!(cfg.c_target > 0.0) || !std::isfinite(cfg.c_target))
    throw std::invalid_argument("c_target must be positive");
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0))
    throw std::invalid_argument("epsilon must lie in [0, 1)");
  if (cfg.memory_gb && !(*cfg.memory_gb >= 0.0))
    throw std::invalid_argument("memory_gb must be non-negative");
  if (cfg.min_dwell < Seconds{0})
    throw std::invalid_argument("min_dwell must be non-negative");
}

enum class Status { running, suspended, migrating };

inline const char *to_string(Status s) {
  switch (s) {
  case Status::running:
    return "running";
  case Status::suspended:
    return "suspended";
  case Status::migrating:
    return "migrating";
  }
  return "?";
}

struct ContainerState {
  std::size_t server = 0; // fleet index
  double quota = 1.0;
  Status status = Status::running;
  double migration_remaining_s = 0.0;
  std::optional<Instant> last_migration_at;
};

enum class ActionKind { noop, set_quota, migrate, suspend, resume };

struct Action {
  ActionKind kind = ActionKind::noop;
  double quota = 0.0;      // set_quota / resume: new quota; migrate: quota on arrival
  std::size_t target = 0;  // migrate
  std::string reason;

  static Action noop(std::string why) { return {ActionKind::noop, 0.0, 0, std::move(why)}; }
  static Action set_quota(double q, std::string why) { return {ActionKind::set_quota, q, 0, std::move(why)}; }
  static Action migrate(std::size_t to, double q, std::string why) {
    return {ActionKind::migrate, q, to, std::move(why)};
  }
  static Action suspend(std::string why) { return {ActionKind::suspend, 0.0, 0, std::move(why)}; }
  static Action resume(double q, std::string why) { return {ActionKind::resume, q, 0, std::move(why)}; }

  /// Equality ignores the reason text.
  friend bool operator==(const Action &a, const Action &b) {
    if (a.kind != b.kind)
      return false;
    switch (a.kind) {
    case ActionKind::noop:
    case ActionKind::suspend:
      return true;
    case ActionKind::set_quota:
    case ActionKind::resume:
      return a.quota == b.quota;
    case ActionKind::migrate:
      return a.target == b.target && a.quota == b.quota;
    }
    return false;
  }
};

inline std::string describe(const Action &a, const Fleet &fleet) {
  char buf[32];
  switch (a.kind) {
  case ActionKind::noop:
    return "NoOp";
  case ActionKind::set_quota:
    std::snprintf(buf, sizeof buf, "%.6g", a.quota);
    return std::string("SetQuota(") + buf + ")";
  case ActionKind::migrate:
    return "MigrateTo(" + fleet[a.target].id + ")";
  case ActionKind::suspend:
    return "Suspend";
  case ActionKind::resume:
    std::snprintf(buf, sizeof buf, "%.6g", a.quota);
    return std::string("Resume(") + buf + ")";
  }
  return "?";
}

struct PolicyInputs {
  double demand = 0.0;    // baseline units
  double intensity = 0.0; // g·CO2e/kWh
  Instant now{};
  const Fleet &fleet;
  std::vector<bool> available; // per fleet index; empty means all available
};

/// g·CO2e/hr drawn by `power_w` watts at `intensity` g·CO2e/kWh.
inline double emissions_rate(double power_w, double intensity) { return power_w / 1000.0 * intensity; }

inline double projected_emissions(const ServerSpec &server, double demand, double quota, double intensity) {
  return emissions_rate(project(demand, server, quota).power_w, intensity);
}

/// Largest quota on `server` keeping projected emissions at or under
/// (1 - epsilon) * c_target; 0 when base power alone is over that bound.
inline double max_quota_for_target(const ServerSpec &server, double demand, double intensity, double c_target,
                                   double epsilon, QuotaGranularity granularity = QuotaGranularity::continuous) {
  const double bound = (1.0 - epsilon) * c_target;
  if (intensity <= 0.0)
    return 1.0;
  const double budget_w = bound * 1000.0 / intensity;
  if (project(demand, server, 1.0).power_w <= budget_w)
    return 1.0;
  const double u_cap = (budget_w - server.base_power_w) / (server.peak_power_w - server.base_power_w);
  if (u_cap <= 0.0)
    return 0.0;
  // demand exceeds capacity * u_cap here, so utilization equals quota at the cap
  const double q = std::min(1.0, u_cap);
  if (granularity == QuotaGranularity::continuous)
    return q;
  const auto cores = static_cast<int>(std::floor(q * server.cores + 1e-9));
  return quota_from_cores(std::min(cores, server.cores), server);
}

namespace detail {

inline constexpr double kThrottleTol = 1e-12;

struct Context {
  const ContainerConfig &cfg;
  const ContainerState &state;
  const PolicyInputs &in;

  const ServerSpec &current() const { return in.fleet[state.server]; }
  double bound() const { return cfg.bound(); }

  bool available(std::size_t i) const { return in.available.empty() || in.available.at(i); }

  bool dwell_elapsed() const {
    return !state.last_migration_at || in.now - *state.last_migration_at >= cfg.min_dwell;
  }

  /// Nearest smaller server that can be provisioned right now.
  std::optional<std::size_t> next_smaller() const {
    for (std::size_t i = state.server; i-- > 0;)
      if (available(i))
        return i;
    return std::nullopt;
  }

  std::optional<std::size_t> next_larger() const {
    for (std::size_t i = state.server + 1; i < in.fleet.size(); ++i)
      if (available(i))
        return i;
    return std::nullopt;
  }

  double max_quota(std::size_t server) const {
    return max_quota_for_target(in.fleet[server], in.demand, in.intensity, cfg.c_target, cfg.epsilon,
                                cfg.quota_granularity);
  }

  double emissions(std::size_t server, double quota) const {
    return projected_emissions(in.fleet[server], in.demand, quota, in.intensity);
  }

  double throttle(std::size_t server, double quota) const {
    return project(in.demand, in.fleet[server], quota).throttle_baseline_units;
  }
};

inline void check_inputs(const ContainerState &state, const PolicyInputs &in) {
  if (in.fleet.size() == 0)
    throw std::invalid_argument("empty fleet");
  if (state.server >= in.fleet.size())
    throw std::invalid_argument("container placed on a server outside the fleet");
  if (!in.available.empty() && in.available.size() != in.fleet.size())
    throw std::invalid_argument("availability vector does not match fleet size");
  if (!(in.demand >= 0.0) || !std::isfinite(in.demand) || !(in.intensity >= 0.0) || !std::isfinite(in.intensity))
    throw std::invalid_argument("demand and intensity must be finite and non-negative");
}

} // namespace detail

/// Rules shared by both variants, evaluated in this order:
///  - suspended: resume once the current server can run with a positive quota,
///    else move to the next smaller server if it emits less there;
///  - at or over the bound: cap the quota at the target-bounded maximum, or
///    migrate to the next smaller server when that lowers both emissions and
///    throttling; suspend when fully capped with nowhere smaller to go;
///  - under the bound and throttled: raise the quota, or at quota 1 move to
///    the next larger server if it fits under the bound.
/// With `allow_migration` false this is the vertical-scaling-only policy.
inline Action step_general(const ContainerConfig &cfg, const ContainerState &state, const PolicyInputs &in,
                           bool allow_migration = true) {
  detail::check_inputs(state, in);
  const detail::Context ctx{cfg, state, in};
  const auto i = state.server;

  if (state.status == Status::migrating)
    return Action::noop("migration in progress");

  if (state.status == Status::suspended) {
    const double q = ctx.max_quota(i);
    if (q > 0.0)
      return Action::resume(q, "carbon intensity allows a non-zero quota");
    const auto smaller = allow_migration ? ctx.next_smaller() : std::nullopt;
    if (smaller && ctx.dwell_elapsed()) {
      const double qj = ctx.max_quota(*smaller);
      if (ctx.emissions(*smaller, qj) < ctx.emissions(i, 0.0))
        return Action::migrate(*smaller, qj, "suspended: smaller server lowers the floor");
    }
    return Action::noop("suspended: base power still over target");
  }

  const double bound = ctx.bound();
  const double current = ctx.emissions(i, state.quota);
  const auto smaller = allow_migration ? ctx.next_smaller() : std::nullopt;

  if (current >= bound) {
    const double q = ctx.max_quota(i);
    if (smaller && ctx.dwell_elapsed()) {
      const double qj = ctx.max_quota(*smaller);
      const double cj = ctx.emissions(*smaller, qj);
      const double tj = ctx.throttle(*smaller, qj);
      if (cj < ctx.emissions(i, q) && tj <= ctx.throttle(i, q) + detail::kThrottleTol)
        return Action::migrate(*smaller, qj, "smaller server emits less without more throttling");
    }
    if (q == 0.0 && !smaller)
      return Action::suspend("fully throttled on the smallest server");
    if (q != state.quota)
      return Action::set_quota(q, "scale to stay under target");
    return Action::noop("holding at target bound");
  }

  if (in.demand > ctx.current().capacity_multiple * state.quota + detail::kThrottleTol) {
    const double q = std::min(1.0, ctx.max_quota(i));
    if (q > state.quota)
      return Action::set_quota(q, "throttled below target: scale up");
    if (state.quota >= 1.0 && allow_migration && ctx.dwell_elapsed()) {
      if (const auto larger = ctx.next_larger(); larger && ctx.emissions(*larger, 1.0) <= bound)
        return Action::migrate(*larger, ctx.max_quota(*larger), "throttled at full quota: larger server fits target");
    }
  }
  return Action::noop("no rule fired");
}

/// General rules, plus moving to the next smaller server whenever it can host
/// the whole demand unthrottled at lower power.
inline Action step_efficiency(const ContainerConfig &cfg, const ContainerState &state, const PolicyInputs &in) {
  auto action = step_general(cfg, state, in);
  if (action.kind != ActionKind::noop || state.status != Status::running)
    return action;

  const detail::Context ctx{cfg, state, in};
  const auto i = state.server;
  if (ctx.emissions(i, state.quota) >= ctx.bound() || !ctx.dwell_elapsed())
    return action;
  if (const auto smaller = ctx.next_smaller()) {
    const auto there = project(in.demand, in.fleet[*smaller], 1.0);
    const auto here = project(in.demand, ctx.current(), state.quota);
    if (there.throttle_baseline_units <= detail::kThrottleTol && there.power_w < here.power_w)
      return Action::migrate(*smaller, ctx.max_quota(*smaller), "underutilized: smaller server hosts demand");
  }
  return action;
}

/// General rules, plus growing into the next larger server whenever it fits
/// under the bound, and keeping the quota at the target-bounded maximum.
inline Action step_performance(const ContainerConfig &cfg, const ContainerState &state, const PolicyInputs &in) {
  auto action = step_general(cfg, state, in);
  if (action.kind != ActionKind::noop || state.status != Status::running)
    return action;

  const detail::Context ctx{cfg, state, in};
  const auto i = state.server;
  if (ctx.emissions(i, state.quota) >= ctx.bound())
    return action;
  if (ctx.dwell_elapsed()) {
    if (const auto larger = ctx.next_larger(); larger && ctx.emissions(*larger, 1.0) <= ctx.bound())
      return Action::migrate(*larger, ctx.max_quota(*larger), "reserve capacity: larger server fits target");
  }
  const double q = ctx.max_quota(i);
  if (q > state.quota)
    return Action::set_quota(q, "raise quota to target-bounded maximum");
  return action;
}

inline Action step_vertical_only(const ContainerConfig &cfg, const ContainerState &state, const PolicyInputs &in) {
  return step_general(cfg, state, in, false);
}

inline Action decide(const ContainerConfig &cfg, const ContainerState &state, const PolicyInputs &in) {
  return cfg.variant == Variant::efficiency ? step_efficiency(cfg, state, in) : step_performance(cfg, state, in);
}

} // namespace carbonctl
