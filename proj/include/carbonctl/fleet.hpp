#pragma once

// Server size classes, the linear utilization-to-power model, and the linear
// cross-server performance model.

#include <algorithm>
#include <cmath>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace carbonctl {

struct ServerSpec {
  std::string id;
  double capacity_multiple = 1.0; // relative to the baseline server
  int cores = 1;
  double base_power_w = 100.0;
  double peak_power_w = 200.0;
  double memory_gb = 1.0;

  friend bool operator==(const ServerSpec &, const ServerSpec &) = default;
};

inline void validate(const ServerSpec &s) {
  if (s.id.empty())
    throw std::invalid_argument("server id must be non-empty");
  if (!(s.capacity_multiple > 0.0))
    throw std::invalid_argument("server '" + s.id + "': capacity_multiple must be positive");
  if (s.cores <= 0)
    throw std::invalid_argument("server '" + s.id + "': cores must be positive");
  if (!(s.base_power_w > 0.0) || !(s.peak_power_w > s.base_power_w))
    throw std::invalid_argument("server '" + s.id + "': need peak_power_w > base_power_w > 0");
  if (!(s.memory_gb > 0.0))
    throw std::invalid_argument("server '" + s.id + "': memory_gb must be positive");
}

/// Servers of one family, ascending by capacity. Index positions are stable
/// and used as server handles throughout the simulator and policy.
class Fleet {
public:
  Fleet(std::vector<ServerSpec> servers, std::string baseline_id) : servers_(std::move(servers)) {
    if (servers_.empty())
      throw std::invalid_argument("fleet must contain at least one server");
    std::set<std::string> ids;
    std::set<double> caps;
    for (const auto &s : servers_) {
      validate(s);
      if (!ids.insert(s.id).second)
        throw std::invalid_argument("duplicate server id '" + s.id + "'");
      if (!caps.insert(s.capacity_multiple).second)
        throw std::invalid_argument("duplicate capacity_multiple in fleet");
    }
    std::sort(servers_.begin(), servers_.end(),
              [](const auto &a, const auto &b) { return a.capacity_multiple < b.capacity_multiple; });
    const auto b = find(baseline_id);
    if (!b)
      throw std::invalid_argument("baseline server '" + baseline_id + "' not in fleet");
    if (servers_[*b].capacity_multiple != 1.0)
      throw std::invalid_argument("baseline server must have capacity_multiple 1.0");
    baseline_ = *b;
  }

  std::size_t size() const noexcept { return servers_.size(); }
  const ServerSpec &operator[](std::size_t i) const { return servers_.at(i); }
  const std::vector<ServerSpec> &servers() const noexcept { return servers_; }
  std::size_t baseline_index() const noexcept { return baseline_; }
  const ServerSpec &baseline() const { return servers_[baseline_]; }

  std::optional<std::size_t> find(const std::string &id) const {
    for (std::size_t i = 0; i < servers_.size(); ++i)
      if (servers_[i].id == id)
        return i;
    return std::nullopt;
  }

  std::size_t index_of(const std::string &id) const {
    if (auto i = find(id))
      return *i;
    throw std::out_of_range("unknown server '" + id + "'");
  }

private:
  std::vector<ServerSpec> servers_;
  std::size_t baseline_ = 0;
};

/// Five-member family at 0.25x..4x, with base/peak power and cores scaled in
/// proportion to capacity from a 100 W / 200 W, 8-core baseline.
inline Fleet default_fleet() {
  std::vector<ServerSpec> servers;
  const struct {
    const char *id;
    double mult;
  } sizes[] = {{"0.25x", 0.25}, {"0.5x", 0.5}, {"1x", 1.0}, {"2x", 2.0}, {"4x", 4.0}};
  for (const auto &[id, m] : sizes)
    servers.push_back({id, m, static_cast<int>(8 * m), 100.0 * m, 200.0 * m, 32.0 * m});
  return Fleet(std::move(servers), "1x");
}

inline double power(const ServerSpec &server, double utilization) {
  if (!(utilization >= 0.0 && utilization <= 1.0))
    throw std::domain_error("utilization must lie in [0, 1]");
  return server.base_power_w + (server.peak_power_w - server.base_power_w) * utilization;
}

struct Projection {
  std::string server_id;
  double utilization = 0.0;
  double power_w = 0.0;
  double granted = 0.0;                // baseline units actually served
  double throttle_baseline_units = 0.0; // demand - granted
};

/// Where a container with `demand` (baseline units) would land on `server` under `quota`.
inline Projection project(double demand, const ServerSpec &server, double quota) {
  if (!(demand >= 0.0) || !std::isfinite(demand))
    throw std::domain_error("demand must be finite and non-negative");
  if (!(quota >= 0.0 && quota <= 1.0))
    throw std::domain_error("quota must lie in [0, 1]");
  const double ceiling = server.capacity_multiple * quota;
  const double granted = std::min(demand, ceiling);
  // granted == ceiling implies quota 1 when utilization hits 1, so clamp only guards rounding
  const double utilization = std::min(1.0, granted / server.capacity_multiple);
  return {server.id, utilization, power(server, utilization), granted, demand - granted};
}

/// Demand estimate from an observed utilization. At the quota ceiling the
/// container is assumed to want twice what it received.
inline double infer_demand(double observed_utilization, const ServerSpec &server, double quota) {
  if (!(observed_utilization >= 0.0 && observed_utilization <= 1.0))
    throw std::domain_error("observed utilization must lie in [0, 1]");
  if (!(quota >= 0.0 && quota <= 1.0))
    throw std::domain_error("quota must lie in [0, 1]");
  const double served = observed_utilization * server.capacity_multiple;
  return observed_utilization < quota ? served : 2.0 * served;
}

inline double quota_from_cores(int cores_granted, const ServerSpec &server) {
  if (cores_granted < 0 || cores_granted > server.cores)
    throw std::out_of_range("cores_granted outside [0, " + std::to_string(server.cores) + "]");
  return static_cast<double>(cores_granted) / static_cast<double>(server.cores);
}

} // namespace carbonctl
