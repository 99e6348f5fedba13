#pragma once

// JSON run configuration. Sections: fleet, container, policy, sim, migration,
// availability. Every section is optional; unknown keys are rejected with the
// JSON path of the offending key.

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

#include "carbonctl/sim.hpp"
#include "json.hpp"

namespace carbonctl {

class ConfigError : public std::runtime_error {
public:
  ConfigError(const std::string &path, const std::string &what)
      : std::runtime_error(path + ": " + what), path_(path) {}
  const std::string &path() const noexcept { return path_; }

private:
  std::string path_;
};

namespace detail {

using Json = nlohmann::json;

inline void only_keys(const Json &obj, const std::string &path, std::initializer_list<const char *> allowed) {
  if (!obj.is_object())
    throw ConfigError(path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &[key, _] : obj.items())
    if (!ok.count(key))
      throw ConfigError(path + "/" + key, "unknown key");
}

inline double number(const Json &obj, const std::string &path, const char *key, double fallback) {
  if (!obj.contains(key))
    return fallback;
  const auto &v = obj[key];
  if (!v.is_number())
    throw ConfigError(path + "/" + key, "expected a number");
  return v.get<double>();
}

inline double required_number(const Json &obj, const std::string &path, const char *key) {
  if (!obj.contains(key))
    throw ConfigError(path + "/" + key, "required");
  return number(obj, path, key, 0.0);
}

inline std::string string_field(const Json &obj, const std::string &path, const char *key, std::string fallback) {
  if (!obj.contains(key))
    return fallback;
  const auto &v = obj[key];
  if (!v.is_string())
    throw ConfigError(path + "/" + key, "expected a string");
  return v.get<std::string>();
}

inline bool bool_field(const Json &obj, const std::string &path, const char *key, bool fallback) {
  if (!obj.contains(key))
    return fallback;
  const auto &v = obj[key];
  if (!v.is_boolean())
    throw ConfigError(path + "/" + key, "expected a boolean");
  return v.get<bool>();
}

inline Fleet parse_fleet(const Json &j) {
  only_keys(j, "/fleet", {"baseline", "servers"});
  if (!j.contains("servers"))
    throw ConfigError("/fleet/servers", "required");
  const auto &arr = j["servers"];
  if (!arr.is_array() || arr.empty())
    throw ConfigError("/fleet/servers", "expected a non-empty array");
  std::vector<ServerSpec> servers;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string path = "/fleet/servers/" + std::to_string(i);
    const auto &s = arr[i];
    only_keys(s, path, {"id", "capacity_multiple", "cores", "base_power_w", "peak_power_w", "memory_gb"});
    ServerSpec spec;
    spec.id = string_field(s, path, "id", "");
    spec.capacity_multiple = required_number(s, path, "capacity_multiple");
    const double cores = required_number(s, path, "cores");
    if (cores != std::floor(cores) || cores < 1)
      throw ConfigError(path + "/cores", "expected a positive integer");
    spec.cores = static_cast<int>(cores);
    spec.base_power_w = required_number(s, path, "base_power_w");
    spec.peak_power_w = required_number(s, path, "peak_power_w");
    spec.memory_gb = required_number(s, path, "memory_gb");
    try {
      validate(spec);
    } catch (const std::invalid_argument &e) {
      throw ConfigError(path, e.what());
    }
    servers.push_back(std::move(spec));
  }
  try {
    return Fleet(std::move(servers), string_field(j, "/fleet", "baseline", "1x"));
  } catch (const std::invalid_argument &e) {
    throw ConfigError("/fleet", e.what());
  }
}

} // namespace detail

inline SimConfig parse_sim_config(const nlohmann::json &doc) {
  using detail::only_keys;
  SimConfig cfg;
  only_keys(doc, "", {"fleet", "container", "policy", "sim", "migration", "availability"});

  if (doc.contains("fleet"))
    cfg.fleet = detail::parse_fleet(doc["fleet"]);

  if (doc.contains("sim")) {
    const auto &j = doc["sim"];
    only_keys(j, "/sim", {"step_s", "demand_scale", "seed", "suspend_baseload_attributed", "demand_signal"});
    const double step = detail::number(j, "/sim", "step_s", 300.0);
    if (!(step >= 1.0) || step != std::floor(step))
      throw ConfigError("/sim/step_s", "expected a positive whole number of seconds");
    cfg.step = Seconds{static_cast<long>(step)};
    cfg.demand_scale = detail::number(j, "/sim", "demand_scale", 1.0);
    if (!(cfg.demand_scale > 0.0))
      throw ConfigError("/sim/demand_scale", "must be positive");
    if (j.contains("seed")) {
      if (!j["seed"].is_number_unsigned())
        throw ConfigError("/sim/seed", "expected a non-negative integer");
      cfg.seed = j["seed"].get<std::uint64_t>();
    }
    cfg.suspend_baseload_attributed = detail::bool_field(j, "/sim", "suspend_baseload_attributed", true);
    const auto signal = detail::string_field(j, "/sim", "demand_signal", "trace");
    if (signal == "trace")
      cfg.demand_signal = DemandSignal::trace;
    else if (signal == "inferred")
      cfg.demand_signal = DemandSignal::inferred;
    else
      throw ConfigError("/sim/demand_signal", "expected 'trace' or 'inferred'");
  }

  if (doc.contains("container")) {
    const auto &j = doc["container"];
    only_keys(j, "/container", {"c_target_g_per_hr", "epsilon", "memory_gb", "min_dwell_s"});
    cfg.container.c_target = detail::number(j, "/container", "c_target_g_per_hr", cfg.container.c_target);
    cfg.container.epsilon = detail::number(j, "/container", "epsilon", cfg.container.epsilon);
    if (j.contains("memory_gb"))
      cfg.container.memory_gb = detail::number(j, "/container", "memory_gb", 0.0);
    if (j.contains("min_dwell_s")) {
      const double dwell = detail::number(j, "/container", "min_dwell_s", 0.0);
      if (!(dwell >= 0.0))
        throw ConfigError("/container/min_dwell_s", "must be non-negative");
      cfg.container.min_dwell = Seconds{static_cast<long>(dwell)};
    } else {
      cfg.container.min_dwell = 2 * cfg.step;
    }
  } else {
    cfg.container.min_dwell = 2 * cfg.step;
  }
  if (cfg.container.c_target != 0.0 && !(cfg.container.c_target > 0.0))
    throw ConfigError("/container/c_target_g_per_hr", "must be positive");
  if (!(cfg.container.epsilon >= 0.0 && cfg.container.epsilon < 1.0))
    throw ConfigError("/container/epsilon", "must lie in [0, 1)");
  if (cfg.container.memory_gb && !(*cfg.container.memory_gb >= 0.0))
    throw ConfigError("/container/memory_gb", "must be non-negative");

  if (doc.contains("policy")) {
    const auto &j = doc["policy"];
    only_keys(j, "/policy", {"kind", "quota"});
    const auto kind = detail::string_field(j, "/policy", "kind", "cc-efficiency");
    const auto parsed = parse_policy_kind(kind);
    if (!parsed)
      throw ConfigError("/policy/kind", "unknown policy '" + kind + "'");
    cfg.policy = *parsed;
    const auto quota = detail::string_field(j, "/policy", "quota", "cores");
    if (quota == "cores")
      cfg.container.quota_granularity = QuotaGranularity::cores;
    else if (quota == "continuous")
      cfg.container.quota_granularity = QuotaGranularity::continuous;
    else
      throw ConfigError("/policy/quota", "expected 'cores' or 'continuous'");
  }

  if (doc.contains("migration")) {
    const auto &j = doc["migration"];
    only_keys(j, "/migration", {"c0_s", "c1_s_per_gb", "mode"});
    cfg.migration.c0_s = detail::number(j, "/migration", "c0_s", cfg.migration.c0_s);
    cfg.migration.c1_s_per_gb = detail::number(j, "/migration", "c1_s_per_gb", cfg.migration.c1_s_per_gb);
    if (!(cfg.migration.c0_s >= 0.0))
      throw ConfigError("/migration/c0_s", "must be non-negative");
    if (!(cfg.migration.c1_s_per_gb >= 0.0))
      throw ConfigError("/migration/c1_s_per_gb", "must be non-negative");
    const auto mode = detail::string_field(j, "/migration", "mode", "stop-and-copy");
    if (mode == "stop-and-copy")
      cfg.migration.mode = MigrationMode::stop_and_copy;
    else if (mode == "live")
      cfg.migration.mode = MigrationMode::live;
    else
      throw ConfigError("/migration/mode", "expected 'stop-and-copy' or 'live'");
  }

  if (doc.contains("availability")) {
    const auto &j = doc["availability"];
    if (!j.is_object())
      throw ConfigError("/availability", "expected an object");
    for (const auto &[id, p] : j.items()) {
      const std::string path = "/availability/" + id;
      if (!cfg.fleet.find(id))
        throw ConfigError(path, "unknown server");
      if (!p.is_number() || !(p.get<double>() >= 0.0 && p.get<double>() <= 1.0))
        throw ConfigError(path, "expected a probability in [0, 1]");
      cfg.availability[id] = p.get<double>();
    }
  }
  return cfg;
}

inline SimConfig load_sim_config(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError(path, "cannot open config");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error &e) {
    throw ConfigError(path, e.what());
  }
  return parse_sim_config(doc);
}

} // namespace carbonctl
