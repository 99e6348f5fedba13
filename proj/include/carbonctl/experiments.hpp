#pragma once

// Policy x target x job matrices, run on a small thread pool and merged in
// key order so output never depends on scheduling.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

#include "carbonctl/metrics.hpp"
#include "carbonctl/sim.hpp"
#include "carbonctl/synth.hpp"

namespace carbonctl {

/// `n` distinct indices out of [0, population), in draw order. Uses its own
/// Fisher-Yates so the sample is identical across standard libraries.
inline std::vector<std::size_t> sample_indices(std::size_t population, std::size_t n, std::uint64_t seed) {
  if (n > population)
    throw std::invalid_argument("cannot sample " + std::to_string(n) + " of " + std::to_string(population));
  std::vector<std::size_t> idx(population);
  for (std::size_t i = 0; i < population; ++i)
    idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const auto span = static_cast<double>(population - i);
    const auto j = i + std::min(population - i - 1, static_cast<std::size_t>(detail::unit_uniform(rng) * span));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(n);
  return idx;
}

struct Experiment {
  std::vector<PolicyKind> policies;
  std::vector<double> targets;
  std::vector<const WorkloadTrace *> jobs;
  const CarbonTrace *carbon = nullptr;
  SimConfig base;
  unsigned parallel = 1;
};

/// Runs every cell and returns summaries ordered by (policy, target, job id).
inline std::vector<RunSummary> run_experiment(const Experiment &ex) {
  if (!ex.carbon)
    throw std::invalid_argument("experiment has no carbon trace");
  if (ex.policies.empty() || ex.targets.empty() || ex.jobs.empty())
    throw std::invalid_argument("experiment needs at least one policy, target and job");

  struct Task {
    PolicyKind policy;
    double target;
    const WorkloadTrace *job;
  };
  std::vector<Task> tasks;
  for (auto p : ex.policies)
    for (double t : ex.targets)
      for (const auto *j : ex.jobs)
        tasks.push_back({p, t, j});

  std::vector<RunSummary> out(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < tasks.size();) {
      try {
        const auto &task = tasks[i];
        SimConfig cfg = ex.base;
        cfg.policy = task.policy;
        cfg.container.c_target = task.target;
        const auto result = run(*task.job, *ex.carbon, cfg);
        out[i] = {std::string(to_string(task.policy)), task.target, task.job->job_id, summarize(result, cfg)};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure)
          failure = std::current_exception();
        next = tasks.size();
      }
    }
  };

  const unsigned n = std::max(1u, std::min<unsigned>(ex.parallel, static_cast<unsigned>(tasks.size())));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n; ++k)
    pool.emplace_back(worker);
  worker();
  for (auto &t : pool)
    t.join();
  if (failure)
    std::rethrow_exception(failure);

  std::stable_sort(out.begin(), out.end(), [](const RunSummary &a, const RunSummary &b) {
    return std::tie(a.policy, a.target, a.job_id) < std::tie(b.policy, b.target, b.job_id);
  });
  return out;
}

} // namespace carbonctl
