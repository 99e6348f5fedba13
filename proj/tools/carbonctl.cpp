// carbonctl: trace analysis, single simulations, policy comparisons and
// target sweeps. Exit codes: 0 success, 2 usage or input error, 1 internal.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "carbonctl/carbonctl.hpp"
#include "carbonctl/http_transport.hpp"

using namespace carbonctl;
namespace fs = std::filesystem;

namespace {

class UsageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string &text, const std::string &flag) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    const auto t = std::string(detail::trim(item));
    if (t.empty())
      throw UsageError(flag + ": empty list element");
    out.push_back(t);
  }
  if (out.empty())
    throw UsageError(flag + ": list must not be empty");
  return out;
}

std::vector<double> parse_numbers(const std::string &text, const std::string &flag) {
  std::vector<double> out;
  for (const auto &item : split_list(text, flag)) {
    const auto v = detail::parse_real(item);
    if (!v)
      throw UsageError(flag + ": '" + item + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

std::ifstream open_in(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw UsageError("cannot open " + path);
  return in;
}

std::ofstream open_out(const fs::path &path) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw UsageError("cannot write " + path.string());
  return out;
}

std::string fmt(const char *spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

ParseOptions fill_options(const std::string &fill) {
  ParseOptions opts;
  if (fill == "forward")
    opts.fill = GapFill::forward;
  else if (fill != "none")
    throw UsageError("--fill must be 'none' or 'forward'");
  return opts;
}

CarbonTrace load_carbon(const std::string &path, const std::string &region, const std::string &fill) {
  auto in = open_in(path);
  return parse_carbon_trace(in, region.empty() ? std::nullopt : std::optional<std::string>(region),
                            fill_options(fill));
}

std::vector<WorkloadTrace> load_workloads(const std::string &path) {
  auto in = open_in(path);
  return parse_workload_traces(in);
}

// ---- analyze-carbon ----

struct AnalyzeCarbonArgs {
  std::string trace, mode = "whole", out, fill = "none";
};

int analyze_carbon(const AnalyzeCarbonArgs &a) {
  CovMode mode;
  if (a.mode == "whole")
    mode = CovMode::whole_series;
  else if (a.mode == "daily")
    mode = CovMode::daily_averaged;
  else
    throw UsageError("--mode must be 'whole' or 'daily'");
  auto in = open_in(a.trace);
  const auto traces = parse_carbon_traces(in, fill_options(a.fill));
  const auto rows = carbon_region_report(traces, mode);

  std::printf("%-12s %12s %10s\n", "region", "mean", "cov");
  for (const auto &r : rows)
    std::printf("%-12s %12.3f %10.6f\n", r.region.c_str(), r.mean, r.cov);
  if (!a.out.empty()) {
    auto out = open_out(a.out);
    out << "region,mean_g_per_kwh,cov\n";
    for (const auto &r : rows)
      out << r.region << ',' << fmt("%.6f", r.mean) << ',' << fmt("%.6f", r.cov) << '\n';
  }
  return 0;
}

// ---- analyze-workload ----

struct AnalyzeWorkloadArgs {
  std::string trace, buckets = "0.25,0.5,1", out;
  std::optional<std::size_t> sample;
  std::uint64_t seed = 0;
};

int analyze_workload(const AnalyzeWorkloadArgs &a) {
  const auto edges = parse_numbers(a.buckets, "--buckets");
  const auto all = load_workloads(a.trace);
  const std::size_t n = a.sample.value_or(all.size());
  if (n == 0 || n > all.size())
    throw UsageError("--sample must lie in [1, " + std::to_string(all.size()) + "]");
  auto idx = sample_indices(all.size(), n, a.seed);
  std::sort(idx.begin(), idx.end());
  std::vector<WorkloadTrace> chosen;
  for (auto i : idx)
    chosen.push_back(all[i]);
  const auto h = workload_cov_histogram(chosen, edges);

  auto upper = [](const CovBucket &b) { return b.upper ? detail::format_real(*b.upper) : std::string("inf"); };
  std::printf("%zu jobs\n%-10s %-10s %8s %10s\n", h.total, "cov_from", "cov_to", "jobs", "percent");
  for (const auto &b : h.buckets)
    std::printf("%-10s %-10s %8zu %10.2f\n", detail::format_real(b.lower).c_str(), upper(b).c_str(), b.count,
                b.percent);
  if (h.undefined_count)
    std::printf("%-21s %8zu %10.2f\n", "undefined", h.undefined_count, h.undefined_percent);
  if (!a.out.empty()) {
    auto out = open_out(a.out);
    out << "cov_lower,cov_upper,count,percent\n";
    for (const auto &b : h.buckets)
      out << detail::format_real(b.lower) << ',' << upper(b) << ',' << b.count << ',' << fmt("%.6f", b.percent)
          << '\n';
    if (h.undefined_count)
      out << "undefined,," << h.undefined_count << ',' << fmt("%.6f", h.undefined_percent) << '\n';
  }
  return 0;
}

// ---- simulate ----

struct SimulateArgs {
  std::string config, workload, carbon, region, job, out, fill = "none";
  bool live = false;
};

int simulate(const SimulateArgs &a) {
  const auto cfg = load_sim_config(a.config);
  auto in = open_in(a.workload);
  const auto workload =
      parse_workload_trace(in, a.job.empty() ? std::nullopt : std::optional<std::string>(a.job));

  SimResult result;
  if (a.live) {
    auto live = live_config_from_env(a.region);
    if (!live)
      throw UsageError("--live needs CARBON_API_URL and CARBON_API_TOKEN");
    CarbonProviderConfig pc{ProviderMode::live, a.region, std::nullopt, live};
    auto provider = make_provider(pc, make_http_transport());
    const auto steps = static_cast<std::size_t>((workload.end() - workload.start()) / cfg.step);
    result = run(workload, *provider, workload.start(), steps, cfg);
  } else {
    if (a.carbon.empty())
      throw UsageError("--carbon is required unless --live is given");
    result = run(workload, load_carbon(a.carbon, a.region, a.fill), cfg);
  }
  const auto summary = summarize(result, cfg);

  const fs::path dir(a.out);
  {
    auto out = open_out(dir / "records.csv");
    write_records_csv(out, result, cfg);
  }
  {
    auto out = open_out(dir / "summary.json");
    out << to_json(summary).dump(2) << '\n';
  }

  for (const auto &r : result.records)
    if (r.action.kind != ActionKind::noop)
      std::printf("%s  %-18s %s\n", format_iso8601(r.t).c_str(), describe(r.action, cfg.fleet).c_str(),
                  r.action.reason.c_str());
  std::printf("avg %.3f g/hr, throttling %.3f%%, migrations %zu, suspended %.1f%% of steps\n",
              summary.avg_emissions_g_per_hr, summary.throttling_pct, summary.migration_count,
              100.0 * summary.suspended_fraction);
  return 0;
}

// ---- compare / sweep ----

struct ExperimentArgs {
  std::string config, workload, carbon, region, fill = "none", targets, out;
  std::string policies = "cc-efficiency,cc-performance,vertical-only,suspend-resume,carbon-agnostic";
  std::string variant = "both";
  std::optional<std::size_t> jobs;
  std::uint64_t seed = 0;
  unsigned parallel = 1;
};

struct Loaded {
  std::vector<WorkloadTrace> workloads;
  CarbonTrace carbon;
  Experiment ex;
};

std::unique_ptr<Loaded> load_experiment(const ExperimentArgs &a) {
  auto l = std::make_unique<Loaded>();
  l->ex.targets = parse_numbers(a.targets, "--targets");
  for (double t : l->ex.targets)
    if (!(t > 0.0))
      throw UsageError("--targets: targets must be positive");
  if (a.parallel == 0)
    throw UsageError("--jobs-parallel must be at least 1");
  if (!a.config.empty())
    l->ex.base = load_sim_config(a.config);
  else
    l->ex.base.container.min_dwell = 2 * l->ex.base.step;
  l->workloads = load_workloads(a.workload);
  l->carbon = load_carbon(a.carbon, a.region, a.fill);

  const std::size_t n = a.jobs.value_or(l->workloads.size());
  if (n == 0 || n > l->workloads.size())
    throw UsageError("--jobs must lie in [1, " + std::to_string(l->workloads.size()) + "]");
  for (auto i : sample_indices(l->workloads.size(), n, a.seed))
    l->ex.jobs.push_back(&l->workloads[i]);
  l->ex.carbon = &l->carbon;
  l->ex.parallel = a.parallel;
  return l;
}

int compare_cmd(const ExperimentArgs &a) {
  std::vector<PolicyKind> policies;
  for (const auto &name : split_list(a.policies, "--policies")) {
    const auto k = parse_policy_kind(name);
    if (!k) {
      std::string valid;
      for (auto p : kAllPolicies)
        valid += (valid.empty() ? "" : ", ") + std::string(to_string(p));
      throw UsageError("unknown policy '" + name + "'; valid policies: " + valid);
    }
    if (std::find(policies.begin(), policies.end(), *k) == policies.end())
      policies.push_back(*k);
  }
  auto l = load_experiment(a);
  l->ex.policies = policies;
  const auto rows = compare(run_experiment(l->ex));
  if (a.out.empty()) {
    write_comparison_csv(std::cout, rows);
  } else {
    auto out = open_out(a.out);
    write_comparison_csv(out, rows);
  }
  return 0;
}

int sweep_cmd(const ExperimentArgs &a) {
  std::vector<PolicyKind> variants;
  if (a.variant == "efficiency" || a.variant == "both")
    variants.push_back(PolicyKind::cc_efficiency);
  if (a.variant == "performance" || a.variant == "both")
    variants.push_back(PolicyKind::cc_performance);
  if (variants.empty())
    throw UsageError("--variant must be 'efficiency', 'performance' or 'both'");
  auto l = load_experiment(a);

  l->ex.policies = variants;
  const auto runs = run_experiment(l->ex);
  l->ex.policies = {PolicyKind::carbon_agnostic};
  auto all = runs;
  const auto agnostic = run_experiment(l->ex);
  all.insert(all.end(), agnostic.begin(), agnostic.end());

  const fs::path dir(a.out);
  {
    auto out = open_out(dir / "comparison.csv");
    write_comparison_csv(out, compare(all));
  }
  {
    auto out = open_out(dir / "server_time.csv");
    write_server_time_csv(out, server_time_distribution(runs));
  }
  std::printf("wrote %s and %s\n", (dir / "comparison.csv").string().c_str(),
              (dir / "server_time.csv").string().c_str());
  return 0;
}

void add_experiment_flags(CLI::App *cmd, ExperimentArgs &a) {
  cmd->add_option("--workload", a.workload, "workload trace CSV")->required();
  cmd->add_option("--carbon", a.carbon, "carbon trace CSV")->required();
  cmd->add_option("--region", a.region, "region to use when the carbon trace has several");
  cmd->add_option("--config", a.config, "base simulation config (JSON)");
  cmd->add_option("--targets", a.targets, "comma-separated carbon targets in g/hr")->required();
  cmd->add_option("--jobs", a.jobs, "number of jobs to sample (default: all)");
  cmd->add_option("--seed", a.seed, "job sampling seed")->required();
  cmd->add_option("--jobs-parallel", a.parallel, "worker threads");
  cmd->add_option("--fill", a.fill, "carbon gap handling: none or forward");
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Carbon-target enforcement simulator and trace analytics"};
  app.require_subcommand(1);

  AnalyzeCarbonArgs ac;
  auto *c_ac = app.add_subcommand("analyze-carbon", "per-region mean and CoV of carbon intensity");
  c_ac->add_option("--trace", ac.trace, "carbon trace CSV")->required();
  c_ac->add_option("--mode", ac.mode, "whole or daily");
  c_ac->add_option("--out", ac.out, "CSV output path");
  c_ac->add_option("--fill", ac.fill, "gap handling: none or forward");

  AnalyzeWorkloadArgs aw;
  auto *c_aw = app.add_subcommand("analyze-workload", "histogram of per-job CPU CoV");
  c_aw->add_option("--trace", aw.trace, "workload trace CSV")->required();
  c_aw->add_option("--sample", aw.sample, "number of jobs to sample (default: all)");
  c_aw->add_option("--seed", aw.seed, "sampling seed")->required();
  c_aw->add_option("--buckets", aw.buckets, "comma-separated CoV bucket edges");
  c_aw->add_option("--out", aw.out, "CSV output path");

  SimulateArgs sm;
  auto *c_sm = app.add_subcommand("simulate", "replay one job under one policy");
  c_sm->add_option("--config", sm.config, "simulation config (JSON)")->required();
  c_sm->add_option("--workload", sm.workload, "workload trace CSV")->required();
  c_sm->add_option("--carbon", sm.carbon, "carbon trace CSV");
  c_sm->add_option("--region", sm.region, "carbon region");
  c_sm->add_option("--job", sm.job, "job id (required when the trace has several)");
  c_sm->add_option("--out", sm.out, "output directory")->required();
  c_sm->add_option("--fill", sm.fill, "carbon gap handling: none or forward");
  c_sm->add_flag("--live", sm.live, "read intensity from CARBON_API_URL instead of --carbon");

  ExperimentArgs cmp;
  auto *c_cmp = app.add_subcommand("compare", "policy x target x job comparison table");
  add_experiment_flags(c_cmp, cmp);
  c_cmp->add_option("--policies", cmp.policies, "comma-separated policy names");
  c_cmp->add_option("--out", cmp.out, "CSV output path (default: stdout)");

  ExperimentArgs sw;
  auto *c_sw = app.add_subcommand("sweep", "variant sweep with server-size distributions");
  add_experiment_flags(c_sw, sw);
  c_sw->add_option("--variant", sw.variant, "efficiency, performance or both");
  c_sw->add_option("--out", sw.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_ac->parsed())
      return analyze_carbon(ac);
    if (c_aw->parsed())
      return analyze_workload(aw);
    if (c_sm->parsed())
      return simulate(sm);
    if (c_cmp->parsed())
      return compare_cmd(cmp);
    if (c_sw->parsed())
      return sweep_cmd(sw);
  } catch (const UsageError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const TraceError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError &e) {
    std::cerr << "error: config " << e.what() << '\n';
    return 2;
  } catch (const StatsError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ProviderError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const SimError &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
