#pragma once

// Experiment harness shared by the CLI, the acceptance runner and the Python
// module: instance families per problem kind, seeded trials, aggregation,
// bench CSV and the classic trade-off sweep.

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "npc/engine.hpp"
#include "npc/rl.hpp"

namespace npc::exp {

/// Problem kind plus the instance family a trial draws from.
///
/// Instance names per kind:
///   gh:  ackley-random (a ~ U[15,25], b ~ U[0.15,0.25]), ackley, himmelblau, rastrigin
///   gnc: synth (points / outliers / noise below)
///   hc:  katsura3-random (coefficients scaled by U[0.5,1.5]), or <name><n> such as katsura5, cyclic5
///   ald: gmm10-random (fresh means per trial), or gmm, gmm<k>, funnel, dw4
struct Task {
  ProblemKind kind = ProblemKind::kGh;
  std::string instance;
  int gnc_points = 100;
  double gnc_outliers = 0.8;
  double gnc_noise = 0.01;
  /// GH starting points are uniform in [-box, box]^n.
  double gh_box = 4.0;
  SolveLimits limits;
};

/// Task on the kind's training family with default limits.
Task default_task(ProblemKind kind);
const char* training_family(ProblemKind kind);

/// Metric columns of a bench row.
std::vector<std::string> metric_names(ProblemKind kind);

using ControllerFactory = std::function<std::unique_ptr<ScheduleController>()>;

ControllerFactory classic_factory(ProblemKind kind);
/// Throws ConfigError when the policy was trained for another kind.
ControllerFactory policy_factory(std::shared_ptr<const rl::PolicyModel> model, ProblemKind kind);

struct TrialResult {
  int trial = 0;
  std::vector<double> metrics;
  int iters = 0;
  double time_ms = 0.0;
  bool success = false;
  bool aborted = false;
  std::string diagnostic;
  /// Largest weight left on a true outlier (GNC only).
  double max_outlier_weight = 0.0;
  /// One trace per solve (one per path for HC).
  std::vector<SolveTrace> traces;
};

/// Trial `trial` under `master_seed`; depends on nothing else.
TrialResult run_trial(const Task& task, const ControllerFactory& factory, std::uint64_t master_seed, int trial);

/// Results ordered by trial index. `threads` <= 0 uses worker_threads().
std::vector<TrialResult> run_trials(const Task& task, const ControllerFactory& factory, std::uint64_t master_seed,
                                    int trials, int threads = 0);

/// NPC_THREADS if set, otherwise the hardware concurrency.
int worker_threads();

/// Calls fn(i) for i in [0, n) on up to `threads` workers.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

struct Aggregate {
  std::vector<double> metrics;  // means over successful trials
  double iters = 0.0;
  double time_ms = 0.0;
  int ok = 0;
  int failed = 0;
};

Aggregate aggregate(const std::vector<TrialResult>& results, std::size_t n_metrics);

/// Columns: trial, method, metrics..., iters, time_ms, status. The last row
/// has trial = "mean" and aggregates the successful trials.
void write_bench_csv(std::ostream& out, ProblemKind kind, const std::string& method,
                     const std::vector<TrialResult>& results);
std::string bench_csv_header(ProblemKind kind);

/// Training distribution of a task (one episode per draw). HC episodes track
/// one random path of a random instance.
rl::InstanceSampler training_sampler(const Task& task);

/// Classic controller family used by the trade-off sweep.
ControllerFactory sweep_factory(ProblemKind kind, int levels, double budget);
/// Default sweep grids (5 levels x 5 budgets).
std::vector<int> sweep_levels(ProblemKind kind);
std::vector<double> sweep_budgets(ProblemKind kind);

struct SweepPoint {
  int levels = 0;
  double budget = 0.0;
  Aggregate result;
};

std::vector<SweepPoint> run_sweep(const Task& task, const std::vector<int>& levels, const std::vector<double>& budgets,
                                  std::uint64_t master_seed, int trials, int threads = 0);

}  // namespace npc::exp
