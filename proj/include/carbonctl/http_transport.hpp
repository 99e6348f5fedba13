#pragma once

// cpp-httplib backed transport for LiveCarbonProvider. Kept out of the
// umbrella header so most consumers never compile httplib.

#include <chrono>
#include <stdexcept>
#include <string>

#include "carbonctl/provider.hpp"
#include "httplib.h"

namespace carbonctl {

/// Splits `scheme://host[:port]/path?query` into the origin and the request target.
inline std::pair<std::string, std::string> split_url(const std::string &url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw std::invalid_argument("URL lacks a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos)
    return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline HttpTransport make_http_transport(std::chrono::seconds timeout = std::chrono::seconds{10}) {
  return [timeout](const std::string &url, const HttpHeaders &headers) -> HttpResponse {
    const auto [origin, target] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    httplib::Headers hdrs;
    for (const auto &[k, v] : headers)
      hdrs.emplace(k, v);
    auto res = client.Get(target, hdrs);
    if (!res)
      throw std::runtime_error("HTTP request to " + origin + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
  };
}

} // namespace carbonctl
