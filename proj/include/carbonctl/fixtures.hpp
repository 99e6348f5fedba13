#pragma once

// Bundled fixtures. Everything here is generated from fixed seeds so the
// files under data/ can be regenerated byte for byte by tools/make_fixtures.

#include <string>
#include <vector>

#include "carbonctl/fleet.hpp"
#include "carbonctl/synth.hpp"

namespace carbonctl::fixtures {

inline constexpr std::size_t kCarbonHours = 96;
inline constexpr std::size_t kWorkloadJobs = 50;
inline constexpr std::size_t kWorkloadSamples = 48 * 12; // 48 h at 5 minutes

/// Three regions with low, medium and high hourly variability.
inline std::vector<CarbonTrace> carbon() {
  SynthParams pl;
  pl.kind = SynthKind::sinusoid;
  pl.length = kCarbonHours;
  pl.level = 740.0;
  pl.amplitude = 15.0;
  pl.phase = 0.4;
  pl.noise = 0.02;
  pl.seed = 7101;

  SynthParams nl = pl;
  nl.level = 360.0;
  nl.amplitude = 45.0;
  nl.phase = 1.1;
  nl.noise = 0.04;
  nl.seed = 7102;

  SynthParams ca = pl;
  ca.level = 250.0;
  ca.amplitude = 110.0;
  ca.phase = -1.2;
  ca.noise = 0.05;
  ca.seed = 7103;

  return {synth_carbon("PL", pl), synth_carbon("NL", nl), synth_carbon("US-CA", ca)};
}

/// 50 jobs: 4 steady (CoV < 0.25), 6 mildly diurnal, 25 strongly variable
/// (CoV between 0.4 and 1) and 15 bursty (CoV > 1).
inline std::vector<WorkloadTrace> workloads() {
  std::vector<WorkloadTrace> out;
  out.reserve(kWorkloadJobs);
  auto name = [](std::size_t i) {
    std::string s = std::to_string(i);
    return "job-" + std::string(3 - s.size(), '0') + s;
  };
  for (std::size_t i = 0; i < kWorkloadJobs; ++i) {
    const double x = static_cast<double>(i);
    const double mem = 1.0 + static_cast<double>(i % 8);
    SynthParams p;
    p.length = kWorkloadSamples;
    p.seed = 9000 + i;
    if (i < 4) {
      p.kind = SynthKind::constant;
      p.level = 0.3 + 0.1 * x;
      p.noise = 0.3;
    } else if (i < 10) {
      p.kind = SynthKind::sinusoid;
      p.level = 0.3 + 0.05 * x;
      p.amplitude = 0.45 * p.level;
      p.period = 288;
      p.phase = 0.5 * x;
      p.noise = 0.05;
    } else if (i < 23) {
      p.kind = SynthKind::sinusoid;
      p.level = 0.25 + 0.03 * (x - 10.0);
      p.amplitude = 0.95 * p.level;
      p.period = 288;
      p.phase = 0.3 * x;
      p.noise = 0.1;
    } else if (i < 35) {
      p.kind = SynthKind::step;
      p.low = 0.05 + 0.01 * (x - 23.0);
      p.high = 0.5 + 0.05 * (x - 23.0);
      p.period = 36 + 6 * (i % 5);
      p.noise = 0.1;
    } else {
      p.kind = SynthKind::bursty;
      p.level = 0.04 + 0.005 * (x - 35.0);
      p.burst_level = 1.2 + 0.1 * (x - 35.0);
      p.burst_probability = 0.015;
      p.burst_length = 6;
      p.noise = 0.1;
    }
    out.push_back(synth_workload(name(i), p, mem));
  }
  return out;
}

/// Two-server scenario: a container starts on an 8-core 1x server, is scaled
/// down as intensity rises, then moves to a 2-core 0.25x server.
namespace demo {

inline Fleet fleet() {
  return Fleet({{"pc3000", 0.25, 2, 25.0, 50.0, 8.0}, {"d710", 1.0, 8, 100.0, 200.0, 32.0}}, "d710");
}

inline constexpr double kTarget = 40.0;
inline constexpr double kMemoryGb = 2.0;

inline CarbonTrace carbon() {
  const std::vector<double> hourly = {200, 200, 250, 270, 300, 300, 300, 300, 300, 300, 300, 300};
  CarbonTrace t{"DEMO", {}, kHour};
  const Instant start = SynthParams{}.start;
  for (std::size_t i = 0; i < hourly.size(); ++i)
    t.samples.push_back({start + static_cast<long>(i) * kHour, hourly[i]});
  return t;
}

inline WorkloadTrace workload() {
  SynthParams p;
  p.kind = SynthKind::constant;
  p.level = 0.6;
  p.length = 12 * 12;
  return synth_workload("demo", p, kMemoryGb, 0.1);
}

} // namespace demo

} // namespace carbonctl::fixtures
