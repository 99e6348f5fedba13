// Acceptance run: one PASS/FAIL line per criterion; exits nonzero if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>

#include "carbonctl/carbonctl.hpp"
#include "oracle.hpp"

using namespace carbonctl;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and budgets.
constexpr double kTargetSlack = 0.01;     // criterion 3: emissions <= c_target * (1 + slack)
constexpr double kOrderTol = 1e-9;        // criteria 4, 5: tie tolerance on means
constexpr double kStatsTol = 1e-9;        // criterion 7
constexpr double kMigrationBudgetS = 120; // criterion 9
constexpr double kBudget1 = 1, kBudget2 = 1, kBudget3 = 60, kBudget4 = 120, kBudget5 = 120, kBudget8 = 30;
constexpr std::uint64_t kRespectInstances = 600;
constexpr std::uint64_t kOracleInstances = 200;
constexpr double kTargetFractions[] = {0.2, 0.4, 0.6, 0.8, 1.0}; // of the carbon-agnostic mean

const std::string kData = CARBONCTL_DATA;

struct Verdict {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void report(int id, const char *name, double budget_s, const std::function<Verdict()> &body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception &e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s) {
    v.ok = false;
    v.detail += " (over the " + std::to_string(budget_s) + " s budget)";
  }
  if (!v.ok)
    ++failures;
  std::printf("%s  %2d  %-28s %7.2fs  %s\n", v.ok ? "PASS" : "FAIL", id, name, secs, v.detail.c_str());
  std::fflush(stdout);
}

std::string fmt(const char *f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ---- shared fixture loading ----

std::vector<CarbonTrace> load_carbon() {
  std::ifstream in(kData + "/carbon_fixture.csv");
  if (!in)
    throw std::runtime_error("missing " + kData + "/carbon_fixture.csv");
  return parse_carbon_traces(in);
}

std::vector<WorkloadTrace> load_workloads() {
  std::ifstream in(kData + "/workload_fixture.csv");
  if (!in)
    throw std::runtime_error("missing " + kData + "/workload_fixture.csv");
  return parse_workload_traces(in);
}

const CarbonTrace &region(const std::vector<CarbonTrace> &all, const std::string &name) {
  for (const auto &t : all)
    if (t.region == name)
      return t;
  throw std::runtime_error("fixture lacks region " + name);
}

struct Cell {
  double emissions = 0, throttle = 0, large = 0;
};

// Per (policy, target) means over the job set; large = time fraction on servers >= 2x.
struct Sweep {
  double agnostic_mean = 0;
  std::vector<double> targets;
  std::map<std::pair<PolicyKind, double>, Cell> cells;
};

Sweep sweep(const CarbonTrace &carbon, const std::vector<WorkloadTrace> &jobs) {
  Sweep s;
  Experiment ex;
  ex.carbon = &carbon;
  for (const auto &j : jobs)
    ex.jobs.push_back(&j);
  ex.parallel = std::max(1u, std::thread::hardware_concurrency());

  ex.policies = {PolicyKind::carbon_agnostic};
  ex.targets = {1.0}; // the agnostic run ignores the target
  for (const auto &r : run_experiment(ex))
    s.agnostic_mean += r.summary.avg_emissions_g_per_hr;
  s.agnostic_mean /= static_cast<double>(jobs.size());

  for (double f : kTargetFractions)
    s.targets.push_back(f * s.agnostic_mean);
  ex.policies.assign(std::begin(kAllPolicies), std::end(kAllPolicies));
  ex.targets = s.targets;
  const double n = static_cast<double>(jobs.size());
  for (const auto &r : run_experiment(ex)) {
    auto &c = s.cells[{*parse_policy_kind(r.policy), r.target}];
    c.emissions += r.summary.avg_emissions_g_per_hr / n;
    c.throttle += r.summary.throttling_pct / n;
    for (const auto &[cap, frac] : r.summary.time_on_server)
      if (cap >= 2.0)
        c.large += frac / n;
  }
  return s;
}

const std::vector<std::pair<std::string, Sweep>> &sweeps() {
  static const auto cached = [] {
    const auto carbon = load_carbon();
    const auto jobs = load_workloads();
    std::vector<std::pair<std::string, Sweep>> out;
    for (const char *r : {"NL", "US-CA"})
      out.emplace_back(r, sweep(region(carbon, r), jobs));
    return out;
  }();
  return cached;
}

// ---- criteria ----

Verdict worked_example() {
  const Fleet fleet({{"small", 0.5, 4, 50, 100, 16}, {"big", 1.0, 8, 100, 200, 32}}, "big");
  const double demand = 0.8;
  const auto big = project(demand, fleet[1], 0.5);
  const auto small = project(demand, fleet[0], 1.0);
  ContainerConfig cfg;
  cfg.c_target = 60.0;
  cfg.epsilon = 0.0;
  const ContainerState st{1, 1.0, Status::running, 0.0, std::nullopt};
  const auto a = decide(cfg, st, {demand, 400.0, *parse_iso8601("2021-06-01T12:00:00Z"), fleet, {}});
  const bool ok = big.power_w == 150.0 && small.power_w == 100.0 &&
                  big.throttle_baseline_units == small.throttle_baseline_units && a.kind == ActionKind::migrate &&
                  a.target == 0;
  return {ok, "big " + fmt("%g W", big.power_w) + ", small " + fmt("%g W", small.power_w) + ", decision " +
                  describe(a, fleet)};
}

Verdict anchors() {
  const ServerSpec s{"s", 1.0, 8, 100, 200, 32};
  const ServerSpec two{"2x", 2.0, 16, 200, 400, 64};
  const ServerSpec half{"0.5x", 0.5, 4, 50, 100, 16};
  const double p = power(s, 0.5);
  const double u2 = project(0.40, two, 1.0).utilization;
  const double uh = project(0.40, half, 1.0).utilization;
  return {p == 150.0 && u2 == 0.20 && uh == 0.80,
          fmt("power %g W", p) + fmt(", 2x util %g", u2) + fmt(", 0.5x util %g", uh)};
}

Verdict target_respect() {
  std::size_t steps = 0, bad = 0;
  std::string first;
  for (std::uint64_t seed = 0; seed < kRespectInstances; ++seed) {
    auto inst = oracle::random_instance(50000 + seed, 48);
    const auto &cfg = inst.cfg;
    for (auto kind : {PolicyKind::cc_efficiency, PolicyKind::cc_performance}) {
      inst.cfg.policy = kind;
      const auto res = run(inst.workload, inst.carbon, inst.cfg);
      std::optional<Instant> last_move;
      for (std::size_t k = 0; k < res.records.size(); ++k) {
        const auto &r = res.records[k];
        ++steps;
        const bool moved = r.action.kind == ActionKind::migrate;
        if (moved)
          last_move = r.t;
        if (r.emissions_g_per_hr <= cfg.container.c_target * (1.0 + kTargetSlack))
          continue;
        // enforcement delay: the step carries (part of) a migration
        if (moved || r.migration_s > 0.0)
          continue;
        // baseload floor: nothing but base power is drawn, and no available
        // server at most this size has lower base-power emissions, or the
        // minimum dwell keeps the container where it is
        const auto &here = cfg.fleet[r.server];
        const double floor_here = emissions_rate(here.base_power_w, r.intensity);
        bool at_floor = r.emissions_g_per_hr <= floor_here * (1.0 + 1e-12);
        if (at_floor) {
          const bool dwell_blocked = last_move && r.t - *last_move < cfg.container.min_dwell;
          bool lower_exists = false;
          for (std::size_t j = 0; j < r.server; ++j) {
            const auto it = cfg.availability.find(cfg.fleet[j].id);
            const bool up = it == cfg.availability.end() || provision(cfg.seed, k, j, it->second);
            if (up && cfg.fleet[j].base_power_w < here.base_power_w)
              lower_exists = true;
          }
          at_floor = dwell_blocked || !lower_exists;
        }
        if (at_floor)
          continue;
        if (++bad == 1)
          first = "seed " + std::to_string(50000 + seed) + " " + std::string(to_string(kind)) + " step " +
                  std::to_string(k) + fmt(": %.4f g/hr", r.emissions_g_per_hr) +
                  fmt(" vs target %.4f", cfg.container.c_target);
      }
    }
  }
  return {bad == 0, std::to_string(bad) + " violations in " + std::to_string(steps) + " steps over " +
                        std::to_string(kRespectInstances) + " instances" + (first.empty() ? "" : "; first: " + first)};
}

Verdict policy_ordering() {
  std::string detail;
  bool ok = true;
  for (const auto &[name, s] : sweeps()) {
    for (double t : s.targets) {
      const auto &eff = s.cells.at({PolicyKind::cc_efficiency, t});
      const auto &perf = s.cells.at({PolicyKind::cc_performance, t});
      const auto &vo = s.cells.at({PolicyKind::vertical_only, t});
      const auto &sr = s.cells.at({PolicyKind::suspend_resume, t});
      if (eff.throttle > vo.throttle + kOrderTol || perf.throttle > vo.throttle + kOrderTol ||
          vo.throttle > sr.throttle + kOrderTol) {
        ok = false;
        detail += name + fmt(" target %.3f: throttle order broken; ", t);
      }
      if (t < s.agnostic_mean)
        for (auto k : kAllPolicies)
          if (s.cells.at({k, t}).emissions > s.agnostic_mean + kOrderTol) {
            ok = false;
            detail += name + fmt(" target %.3f: ", t) + std::string(to_string(k)) + " above agnostic; ";
          }
    }
    detail += name + fmt(" agnostic %.3f g/hr; ", s.agnostic_mean);
  }
  return {ok, detail + "5 targets x 2 regions x 50 jobs"};
}

Verdict variant_ordering() {
  std::string detail;
  bool ok = true;
  for (const auto &[name, s] : sweeps())
    for (double t : s.targets) {
      const auto &eff = s.cells.at({PolicyKind::cc_efficiency, t});
      const auto &perf = s.cells.at({PolicyKind::cc_performance, t});
      if (perf.emissions + kOrderTol < eff.emissions) {
        ok = false;
        detail += name + fmt(" target %.3f: ", t) + fmt("perf emissions %.4f", perf.emissions) +
                  fmt(" < eff %.4f; ", eff.emissions);
      }
      if (perf.large + kOrderTol < eff.large) {
        ok = false;
        detail += name + fmt(" target %.3f: ", t) + fmt("perf large-server time %.4f", perf.large) +
                  fmt(" < eff %.4f; ", eff.large);
      }
    }
  return {ok, ok ? "performance >= efficiency on emissions and >=2x server time at all 10 cells" : detail};
}

Verdict suspend_pathology() {
  SynthParams w;
  w.level = 0.1;
  w.length = 288;
  SynthParams c;
  c.level = 800;
  c.length = 24;
  const auto workload = synth_workload("steady", w, 4.0, 0.0);
  const auto carbon = synth_carbon("HIGH", c);
  SimConfig cfg;
  cfg.container.c_target = 40; // baseline base power alone emits 80 g/hr at 800 g/kWh
  cfg.policy = PolicyKind::suspend_resume;
  const auto sr = summarize(run(workload, carbon, cfg), cfg);
  cfg.policy = PolicyKind::cc_efficiency;
  const auto cc_run = run(workload, carbon, cfg);
  const auto cc = summarize(cc_run, cfg);
  const bool reached_smallest = cc_run.records.back().server == 0;
  const bool ok = sr.suspended_fraction == 1.0 && cc.suspended_fraction < 1.0 && reached_smallest;
  return {ok, fmt("suspend-resume suspended %.3f", sr.suspended_fraction) +
                  fmt(", cc-efficiency suspended %.3f", cc.suspended_fraction) + " ending on " +
                  cfg.fleet[cc_run.records.back().server].id};
}

Verdict statistics() {
  double worst = 0;
  auto track = [&](double got, double want) { worst = std::max(worst, std::abs(got - want)); };
  const std::vector<double> constant(37, 4.2);
  auto s = compute_stats(constant);
  track(s.mean, 4.2);
  track(s.stddev, 0.0);
  track(s.cov, 0.0);

  std::vector<double> two;
  for (int i = 0; i < 50; ++i)
    two.push_back(i % 2 ? 30.0 : 10.0);
  s = compute_stats(two);
  track(s.mean, 20.0);
  track(s.stddev, 10.0);
  track(s.cov, 0.5);

  std::vector<double> sine;
  const int n = 240;
  for (int i = 0; i < n; ++i)
    sine.push_back(300.0 + 90.0 * std::sin(2.0 * std::numbers::pi * i / 24.0));
  s = compute_stats(sine);
  track(s.mean, 300.0);
  track(s.stddev, 90.0 / std::sqrt(2.0));
  track(s.cov, 90.0 / std::sqrt(2.0) / 300.0);

  std::mt19937_64 rng(2024);
  double worst_scale = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(5 + rng() % 200), y;
    for (auto &v : x)
      v = 1.0 + 500.0 * detail::unit_uniform(rng);
    const double k = std::exp(-10.0 + 20.0 * detail::unit_uniform(rng));
    for (double v : x)
      y.push_back(k * v);
    worst_scale = std::max(worst_scale, std::abs(compute_stats(x).cov - compute_stats(y).cov));
  }
  return {worst <= kStatsTol && worst_scale <= kStatsTol,
          fmt("closed-form max error %.2e", worst) + fmt(", scale-invariance max error %.2e", worst_scale)};
}

Verdict oracle_equivalence() {
  std::size_t mismatches = 0, steps = 0;
  for (std::uint64_t seed = 0; seed < kOracleInstances; ++seed) {
    auto inst = oracle::random_instance(90000 + seed, 12);
    for (auto [kind, mode] : {std::pair{PolicyKind::cc_efficiency, oracle::Mode::efficiency},
                              std::pair{PolicyKind::cc_performance, oracle::Mode::performance},
                              std::pair{PolicyKind::vertical_only, oracle::Mode::vertical}}) {
      inst.cfg.policy = kind;
      const auto got = run(inst.workload, inst.carbon, inst.cfg);
      const auto want = oracle::replay(inst, mode);
      if (got.records.size() != want.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t k = 0; k < want.size(); ++k) {
        ++steps;
        if (!oracle::same(want[k].act, got.records[k].action))
          ++mismatches;
      }
    }
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatched actions in " + std::to_string(steps) + " steps"};
}

Verdict migration_calibration() {
  const MigrationModel m;
  const double d7 = m.duration_s(7.0);
  const double a = m.duration_s(1.0), b = m.duration_s(2.0), c = m.duration_s(3.0);
  const bool affine = (b - a) == (c - b) && (c - a) == 2.0 * (b - a);
  return {d7 <= kMigrationBudgetS && affine, fmt("d(7 GB) = %g s", d7) + fmt(", d(1,2,3) = %g", a) +
                                                 fmt("/%g", b) + fmt("/%g s", c)};
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  const auto dir = fs::temp_directory_path() / "carbonctl_acceptance";
  fs::create_directories(dir);
  std::string outputs[2];
  for (int i = 0; i < 2; ++i) {
    const auto out = dir / ("compare" + std::to_string(i) + ".csv");
    fs::remove(out);
    const std::string cmd = std::string(CARBONCTL_BIN) + " compare --workload " + kData +
                            "/workload_fixture.csv --carbon " + kData +
                            "/carbon_fixture.csv --region US-CA --targets 10,25,40 --jobs 20 --seed 7"
                            " --jobs-parallel " +
                            std::to_string(i + 1) + " --out " + out.string();
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      return {false, "compare exited with status " + std::to_string(status)};
    outputs[i] = slurp(out);
  }
  const bool ok = !outputs[0].empty() && outputs[0] == outputs[1];
  return {ok, std::to_string(outputs[0].size()) + " bytes, " + (ok ? "identical" : "different")};
}

} // namespace

int main() {
  report(1, "worked example", kBudget1, worked_example);
  report(2, "power/normalization anchors", kBudget2, anchors);
  report(3, "target respect", kBudget3, target_respect);
  report(4, "policy ordering", kBudget4, policy_ordering);
  report(5, "variant ordering", kBudget5, variant_ordering);
  report(6, "suspend-resume pathology", 0, suspend_pathology);
  report(7, "statistics", 0, statistics);
  report(8, "oracle equivalence", kBudget8, oracle_equivalence);
  report(9, "migration calibration", 0, migration_calibration);
  report(10, "determinism", 0, determinism);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
