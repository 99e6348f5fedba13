#pragma once

// Carbon-intensity sources for the control loop: a recorded trace, or a live
// carbon-information HTTP service behind an injectable transport.

#include <cstdlib>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "carbonctl/time.hpp"
#include "carbonctl/traces.hpp"
#include "json.hpp"

namespace carbonctl {

class ProviderError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class CarbonProvider {
public:
  virtual ~CarbonProvider() = default;
  /// Grid carbon intensity (g·CO2e/kWh) in effect at `t`.
  virtual double intensity_at(Instant t) = 0;
};

/// Piecewise-constant lookup: the sample whose interval [ts, ts + resolution) contains t.
class TraceCarbonProvider final : public CarbonProvider {
public:
  explicit TraceCarbonProvider(CarbonTrace trace) : trace_(std::move(trace)) {
    if (trace_.samples.empty())
      throw ProviderError("carbon trace is empty");
  }

  double intensity_at(Instant t) override { return lookup(t); }

  double lookup(Instant t) const {
    if (t < trace_.start() || t >= trace_.end())
      throw ProviderError("time " + format_iso8601(t) + " outside carbon trace span [" +
                          format_iso8601(trace_.start()) + ", " + format_iso8601(trace_.end()) + ")");
    const auto idx = static_cast<std::size_t>((t - trace_.start()) / trace_.resolution);
    return trace_.samples[idx].intensity;
  }

  const CarbonTrace &trace() const noexcept { return trace_; }

private:
  CarbonTrace trace_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

/// Performs a GET. Throws on transport-level failure (DNS, connect, timeout).
using HttpTransport = std::function<HttpResponse(const std::string &url, const HttpHeaders &headers)>;

using StaleWarning = std::function<void(const std::string &message, Seconds staleness)>;

struct LiveProviderConfig {
  std::string endpoint_url;
  std::string auth_token;
  std::string region; // appended as `zone=` unless the URL already selects one
  Seconds refresh = kHour;
  Seconds max_staleness = 3 * kHour;
  int attempts = 3;
};

/// Reads CARBON_API_URL and CARBON_API_TOKEN.
inline std::optional<LiveProviderConfig> live_config_from_env(std::string region = {}) {
  const char *url = std::getenv("CARBON_API_URL");
  const char *token = std::getenv("CARBON_API_TOKEN");
  if (!url || !token || !*url || !*token)
    return std::nullopt;
  LiveProviderConfig cfg;
  cfg.endpoint_url = url;
  cfg.auth_token = token;
  cfg.region = std::move(region);
  return cfg;
}

/// Parses `{"carbonIntensity": <number>, "datetime": "<ISO-8601>"}`.
inline CarbonSample parse_live_response(const std::string &body) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error &e) {
    throw ProviderError(std::string("malformed JSON from carbon service: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("carbonIntensity") || !doc["carbonIntensity"].is_number())
    throw ProviderError("carbon service response lacks numeric 'carbonIntensity'");
  if (!doc.contains("datetime") || !doc["datetime"].is_string())
    throw ProviderError("carbon service response lacks string 'datetime'");
  const auto ts = parse_iso8601(doc["datetime"].get<std::string>());
  if (!ts)
    throw ProviderError("carbon service returned unparseable datetime '" + doc["datetime"].get<std::string>() + "'");
  const double value = doc["carbonIntensity"].get<double>();
  if (!(value >= 0.0))
    throw ProviderError("carbon service returned negative intensity");
  return {*ts, value};
}

class LiveCarbonProvider final : public CarbonProvider {
public:
  LiveCarbonProvider(LiveProviderConfig cfg, HttpTransport transport, StaleWarning warn = default_warning)
      : cfg_(std::move(cfg)), transport_(std::move(transport)), warn_(std::move(warn)) {
    if (cfg_.endpoint_url.empty() || cfg_.auth_token.empty())
      throw ProviderError("live carbon provider needs an endpoint URL and auth token");
    if (cfg_.refresh <= Seconds{0} || cfg_.attempts < 1)
      throw ProviderError("live carbon provider needs a positive refresh interval and attempt count");
  }

  /// One request (with retries) against the configured endpoint.
  CarbonSample fetch_live() {
    std::string last_error;
    for (int attempt = 0; attempt < cfg_.attempts; ++attempt) {
      try {
        const auto resp = transport_(request_url(), {{"auth-token", cfg_.auth_token}});
        if (resp.status < 200 || resp.status >= 300) {
          last_error = "carbon service returned HTTP " + std::to_string(resp.status);
          continue;
        }
        return parse_live_response(resp.body);
      } catch (const ProviderError &) {
        throw; // schema problems do not improve on retry
      } catch (const std::exception &e) {
        last_error = std::string("carbon service request failed: ") + e.what();
      }
    }
    throw ProviderError(last_error);
  }

  /// Returns the cached value, refreshing it at most once per refresh interval of `now`.
  double intensity_at(Instant now) override {
    std::lock_guard lock(mu_);
    if (!last_attempt_ || now - *last_attempt_ >= cfg_.refresh) {
      last_attempt_ = now;
      try {
        cached_ = fetch_live();
        last_success_ = now;
      } catch (const ProviderError &e) {
        if (!cached_)
          throw;
        const auto staleness = now - *last_success_;
        if (staleness > cfg_.max_staleness)
          throw ProviderError(std::string(e.what()) + "; cached value is " + std::to_string(staleness.count()) +
                              "s stale, beyond the limit");
        warn_(e.what(), staleness);
      }
    }
    return cached_->intensity;
  }

  std::string request_url() const {
    if (cfg_.region.empty() || cfg_.endpoint_url.find("zone=") != std::string::npos)
      return cfg_.endpoint_url;
    const char sep = cfg_.endpoint_url.find('?') == std::string::npos ? '?' : '&';
    return cfg_.endpoint_url + sep + "zone=" + cfg_.region;
  }

private:
  static void default_warning(const std::string &message, Seconds staleness) {
    std::cerr << "warning: " << message << "; using carbon intensity " << staleness.count() << "s stale\n";
  }

  LiveProviderConfig cfg_;
  HttpTransport transport_;
  StaleWarning warn_;
  std::mutex mu_;
  std::optional<Instant> last_attempt_;
  std::optional<Instant> last_success_;
  std::optional<CarbonSample> cached_;
};

enum class ProviderMode { trace, live };

struct CarbonProviderConfig {
  ProviderMode mode = ProviderMode::trace;
  std::string region;
  std::optional<CarbonTrace> trace;
  std::optional<LiveProviderConfig> live;
};

inline std::unique_ptr<CarbonProvider> make_provider(const CarbonProviderConfig &cfg, HttpTransport transport = {}) {
  if (cfg.mode == ProviderMode::trace) {
    if (!cfg.trace)
      throw ProviderError("trace mode requires a carbon trace");
    return std::make_unique<TraceCarbonProvider>(*cfg.trace);
  }
  if (!cfg.live)
    throw ProviderError("live mode requires an endpoint and token");
  if (!transport)
    throw ProviderError("live mode requires an HTTP transport");
  auto live = *cfg.live;
  if (live.region.empty())
    live.region = cfg.region;
  return std::make_unique<LiveCarbonProvider>(std::move(live), std::move(transport));
}

} // namespace carbonctl
