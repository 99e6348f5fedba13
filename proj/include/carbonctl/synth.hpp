#pragma once

// Deterministic synthetic traces for tests and bundled fixtures.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "carbonctl/traces.hpp"

namespace carbonctl {

enum class SynthKind { constant, sinusoid, step, bursty };

struct SynthParams {
  SynthKind kind = SynthKind::constant;
  Instant start = Instant{std::chrono::sys_days{std::chrono::year{2021} / 6 / 1}};
  std::size_t length = 24; // samples
  std::optional<Seconds> resolution;

  double level = 0.0;     // constant value, sinusoid mean, bursty base
  double amplitude = 0.0; // sinusoid
  std::size_t period = 24; // sinusoid period / step block length, in samples
  double phase = 0.0;     // sinusoid, radians

  double low = 0.0; // step
  double high = 0.0;

  double burst_level = 0.0; // bursty
  double burst_probability = 0.05;
  std::size_t burst_length = 3;

  double noise = 0.0; // multiplicative jitter, uniform in [1 - noise, 1 + noise]
  std::uint64_t seed = 0;
};

namespace detail {

/// Uniform [0, 1) from the raw 64-bit engine output; portable across standard libraries.
inline double unit_uniform(std::mt19937_64 &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

} // namespace detail

inline std::vector<double> synth_series(const SynthParams &p) {
  if (p.length == 0)
    throw std::invalid_argument("synthetic trace length must be positive");
  if (p.noise < 0.0 || p.amplitude < 0.0)
    throw std::invalid_argument("noise and amplitude must be non-negative");
  if ((p.kind == SynthKind::sinusoid || p.kind == SynthKind::step) && p.period == 0)
    throw std::invalid_argument("period must be positive");

  std::mt19937_64 rng(p.seed);
  std::vector<double> out;
  out.reserve(p.length);
  std::size_t burst_left = 0;
  for (std::size_t i = 0; i < p.length; ++i) {
    double v = 0.0;
    switch (p.kind) {
    case SynthKind::constant:
      v = p.level;
      break;
    case SynthKind::sinusoid:
      v = p.level + p.amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(i) /
                                               static_cast<double>(p.period) +
                                           p.phase);
      break;
    case SynthKind::step:
      v = (i / p.period) % 2 == 0 ? p.low : p.high;
      break;
    case SynthKind::bursty:
      if (burst_left == 0 && detail::unit_uniform(rng) < p.burst_probability)
        burst_left = p.burst_length;
      if (burst_left > 0) {
        v = p.burst_level;
        --burst_left;
      } else {
        v = p.level;
      }
      break;
    }
    if (p.noise > 0.0)
      v *= 1.0 + p.noise * (2.0 * detail::unit_uniform(rng) - 1.0);
    if (!(v >= 0.0))
      throw std::invalid_argument("synthetic parameters produce a negative value at sample " + std::to_string(i));
    out.push_back(v);
  }
  return out;
}

inline CarbonTrace synth_carbon(std::string region, const SynthParams &p) {
  const auto values = synth_series(p);
  CarbonTrace t{std::move(region), {}, p.resolution.value_or(kHour)};
  t.samples.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    t.samples.push_back({p.start + static_cast<long>(i) * t.resolution, values[i]});
  return t;
}

/// CPU series from `p` (fractions of baseline capacity); min/max are spread
/// symmetrically around the average.
inline WorkloadTrace synth_workload(std::string job_id, const SynthParams &p, double mem_gb = 1.0,
                                    double spread = 0.2) {
  if (mem_gb < 0.0 || spread < 0.0 || spread > 1.0)
    throw std::invalid_argument("invalid memory or spread");
  const auto values = synth_series(p);
  WorkloadTrace t{std::move(job_id), {}, p.resolution.value_or(kFiveMinutes)};
  t.samples.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    t.samples.push_back(
        {p.start + static_cast<long>(i) * t.resolution, values[i], values[i] * (1.0 - spread), values[i] * (1.0 + spread), mem_gb});
  return t;
}

} // namespace carbonctl
