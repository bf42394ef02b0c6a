#include "npc/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <ostream>
#include <thread>

#include "npc/ald.hpp"
#include "npc/errors.hpp"
#include "npc/gh.hpp"
#include "npc/gnc.hpp"
#include "npc/hc.hpp"

namespace npc::exp {

namespace {

// Independent streams inside one trial.
enum Stream : std::uint64_t { kInstance = 1, kSolver = 2, kReference = 3 };

SeededRng stream(std::uint64_t trial_seed, Stream s) { return SeededRng(SeededRng::derive(trial_seed, s)); }

/// Splits "katsura5" into ("katsura", 5).
std::pair<std::string, int> split_name(const std::string& name) {
  std::size_t k = name.size();
  while (k > 0 && std::isdigit(static_cast<unsigned char>(name[k - 1]))) --k;
  if (k == name.size() || k == 0) throw ConfigError("expected a system name with a size, e.g. katsura5: '" + name + "'");
  return {name.substr(0, k), std::stoi(name.substr(k))};
}

poly::PolynomialSystem hc_system(const std::string& instance, SeededRng& rng) {
  if (instance == "katsura3-random") {
    return poly::katsura(3).transform_coefficients(
        [&](std::size_t, std::size_t, linalg::Complex c) { return c * rng.uniform(0.5, 1.5); });
  }
  const auto [name, n] = split_name(instance);
  return poly::benchmark_system(name, n);
}

gh::BenchmarkFunction gh_function(const std::string& instance, SeededRng& rng) {
  if (instance == "ackley-random") {
    const double a = rng.uniform(15.0, 25.0);
    const double b = rng.uniform(0.15, 0.25);
    return gh::BenchmarkFunction::ackley(2, a, b);
  }
  return gh::parse_benchmark(instance);
}

ald::TargetDistribution ald_target(const std::string& instance, SeededRng& rng) {
  if (instance == "gmm10-random") return ald::make_target({ald::TargetKind::kGmm, 10}, rng.next_u64());
  return ald::make_target(ald::parse_target_spec(instance), 1);
}

std::unique_ptr<gh::GhProblem> gh_problem(const Task& task, SeededRng& rng) {
  const gh::BenchmarkFunction fn = gh_function(task.instance, rng);
  std::vector<double> x0(static_cast<std::size_t>(fn.dimension));
  for (double& v : x0) v = rng.uniform(-task.gh_box, task.gh_box);
  return std::make_unique<gh::GhProblem>(fn, gh::default_config(fn), x0);
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

void check_instance(const Task& task) {
  switch (task.kind) {
    case ProblemKind::kGnc:
      if (task.instance != "synth") throw ConfigError("gnc instance must be 'synth'");
      break;
    case ProblemKind::kGh: {
      SeededRng probe(0);
      gh_function(task.instance, probe);
      break;
    }
    case ProblemKind::kHc:
      if (task.instance != "katsura3-random") {
        const auto [name, n] = split_name(task.instance);
        poly::benchmark_system(name, n);
      }
      break;
    case ProblemKind::kAld:
      if (task.instance != "gmm10-random") ald::parse_target_spec(task.instance);
      break;
  }
}

}  // namespace

const char* training_family(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kGnc:
      return "synth";
    case ProblemKind::kGh:
      return "ackley-random";
    case ProblemKind::kHc:
      return "katsura3-random";
    case ProblemKind::kAld:
      return "gmm10-random";
  }
  return "";
}

Task default_task(ProblemKind kind) {
  Task t;
  t.kind = kind;
  t.instance = training_family(kind);
  t.limits = default_limits(kind);
  return t;
}

std::vector<std::string> metric_names(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kGnc:
      return {"log10_E_R", "log10_E_t"};
    case ProblemKind::kGh:
      return {"f"};
    case ProblemKind::kHc:
      return {"success", "iters_per_path"};
    case ProblemKind::kAld:
      return {"W2", "KSD"};
  }
  return {};
}

ControllerFactory classic_factory(ProblemKind kind) {
  return [kind] { return classic_controller(kind); };
}

ControllerFactory policy_factory(std::shared_ptr<const rl::PolicyModel> model, ProblemKind kind) {
  if (model->kind != kind)
    throw ConfigError(std::string("policy was trained for ") + to_string(model->kind) + ", not " + to_string(kind));
  return [model] { return std::make_unique<rl::PolicyController>(*model); };
}

TrialResult run_trial(const Task& task, const ControllerFactory& factory, std::uint64_t master_seed, int trial) {
  const std::uint64_t seed = SeededRng::derive(master_seed, static_cast<std::uint64_t>(trial));
  SeededRng inst_rng = stream(seed, kInstance);
  SeededRng solver_rng = stream(seed, kSolver);
  TrialResult r;
  r.trial = trial;
  const auto start = std::chrono::steady_clock::now();
  try {
    switch (task.kind) {
      case ProblemKind::kGh: {
        auto p = gh_problem(task, inst_rng);
        auto c = factory();
        const SolveTrace t = solve(*p, *c, task.limits, solver_rng);
        r.iters = t.total_corrector_iters;
        r.success = t.success;
        r.aborted = t.aborted;
        r.diagnostic = t.diagnostic;
        r.metrics = {gh::eval_benchmark(p->function(), p->solution())};
        r.traces.push_back(t);
        break;
      }
      case ProblemKind::kGnc: {
        const auto s = gnc::synth_registration(task.gnc_points, task.gnc_outliers, task.gnc_noise, seed);
        gnc::GncProblem p(s.instance);
        auto c = factory();
        const SolveTrace t = solve(p, *c, task.limits, solver_rng);
        r.iters = t.total_corrector_iters;
        r.aborted = t.aborted;
        r.diagnostic = t.diagnostic;
        const auto e = gnc::registration_errors(p.transform(), s.ground_truth);
        r.metrics = {std::log10(std::max(e.rotation * 180.0 / std::numbers::pi, 1e-12)),
                     std::log10(std::max(e.translation, 1e-12))};
        const auto w = gnc::update_weights(s.instance, p.transform(), 1.0);
        for (std::size_t i = 0; i < w.size(); ++i)
          if (!s.instance.inlier_mask[i]) r.max_outlier_weight = std::max(r.max_outlier_weight, w[i]);
        r.success = t.success && e.rotation < 5.0 * std::numbers::pi / 180.0;
        r.traces.push_back(t);
        if (t.success && !r.success) r.diagnostic = "rotation error above 5 degrees";
        break;
      }
      case ProblemKind::kHc: {
        const poly::PolynomialSystem target = hc_system(task.instance, inst_rng);
        const poly::StartSystem start = poly::total_degree_start(target, inst_rng.next_u64());
        const linalg::Complex gamma = hc::random_gamma(inst_rng);
        const hc::SolveAllResult all = hc::solve_all(target, start, gamma, factory, task.limits, solver_rng.next_u64());
        const auto paths = static_cast<double>(all.paths.size());
        for (const auto& p : all.paths) {
          r.iters += p.trace.total_corrector_iters;
          r.traces.push_back(p.trace);
        }
        r.metrics = {all.successes / paths, r.iters / paths};
        r.success = all.successes == static_cast<int>(all.paths.size());
        if (!r.success)
          r.diagnostic = std::to_string(all.paths.size() - static_cast<std::size_t>(all.successes)) + " of " +
                         std::to_string(all.paths.size()) + " paths failed";
        break;
      }
      case ProblemKind::kAld: {
        const ald::TargetDistribution dist = ald_target(task.instance, inst_rng);
        const ald::AldConfig cfg = ald::default_config(dist);
        ald::AldProblem p(dist, cfg, ald::sample_source(dist, cfg.n_particles, inst_rng));
        auto c = factory();
        const SolveTrace t = solve(p, *c, task.limits, solver_rng);
        r.iters = t.total_corrector_iters;
        r.success = t.success;
        r.aborted = t.aborted;
        r.diagnostic = t.diagnostic;
        double w2 = std::numeric_limits<double>::quiet_NaN();
        if (ald::has_exact_sampler(dist)) {
          SeededRng ref_rng = stream(seed, kReference);
          w2 = ald::w2(p.particles(), ald::sample_target(dist, p.particles().rows(), ref_rng));
        }
        r.metrics = {w2, ald::ksd(p.particles(), dist)};
        r.traces.push_back(t);
        break;
      }
    }
  } catch (const Error& e) {
    r.success = false;
    r.aborted = true;
    r.diagnostic = e.what();
  }
  r.time_ms = elapsed_ms(start);
  return r;
}

int worker_threads() {
  if (const char* env = std::getenv("NPC_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(std::min(v, 256L));
    throw ConfigError(std::string("NPC_THREADS must be a positive integer, got '") + env + "'");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

std::vector<TrialResult> run_trials(const Task& task, const ControllerFactory& factory, std::uint64_t master_seed,
                                    int trials, int threads) {
  if (trials < 1) throw ConfigError("trials must be >= 1");
  check_instance(task);
  std::vector<TrialResult> out(static_cast<std::size_t>(trials));
  parallel_for(trials, threads > 0 ? threads : worker_threads(),
               [&](int i) { out[static_cast<std::size_t>(i)] = run_trial(task, factory, master_seed, i); });
  return out;
}

Aggregate aggregate(const std::vector<TrialResult>& results, std::size_t n_metrics) {
  Aggregate a;
  a.metrics.assign(n_metrics, 0.0);
  for (const auto& r : results) {
    if (!r.success) {
      ++a.failed;
      continue;
    }
    ++a.ok;
    for (std::size_t k = 0; k < n_metrics && k < r.metrics.size(); ++k) a.metrics[k] += r.metrics[k];
    a.iters += r.iters;
    a.time_ms += r.time_ms;
  }
  if (a.ok > 0) {
    for (double& m : a.metrics) m /= a.ok;
    a.iters /= a.ok;
    a.time_ms /= a.ok;
  } else {
    for (double& m : a.metrics) m = std::numeric_limits<double>::quiet_NaN();
    a.iters = a.time_ms = std::numeric_limits<double>::quiet_NaN();
  }
  return a;
}

std::string bench_csv_header(ProblemKind kind) {
  std::string h = "trial,method";
  for (const auto& m : metric_names(kind)) h += "," + m;
  return h + ",iters,time_ms,status";
}

void write_bench_csv(std::ostream& out, ProblemKind kind, const std::string& method,
                     const std::vector<TrialResult>& results) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return std::string(buf);
  };
  out << bench_csv_header(kind) << "\n";
  const std::size_t nm = metric_names(kind).size();
  for (const auto& r : results) {
    out << r.trial << "," << method;
    for (std::size_t k = 0; k < nm; ++k) out << "," << (k < r.metrics.size() ? num(r.metrics[k]) : "nan");
    out << "," << r.iters << "," << num(r.time_ms) << "," << (r.success ? "ok" : r.aborted ? "aborted" : "failed")
        << "\n";
  }
  const Aggregate a = aggregate(results, nm);
  out << "mean," << method;
  for (double m : a.metrics) out << "," << num(m);
  out << "," << num(a.iters) << "," << num(a.time_ms) << "," << a.ok << "/" << results.size() << "\n";
}

rl::InstanceSampler training_sampler(const Task& task) {
  check_instance(task);
  return [task](SeededRng& rng) {
    rl::TrainingInstance inst;
    inst.limits = task.limits;
    switch (task.kind) {
      case ProblemKind::kGh:
        inst.problem = gh_problem(task, rng);
        break;
      case ProblemKind::kGnc: {
        const auto s = gnc::synth_registration(task.gnc_points, task.gnc_outliers, task.gnc_noise, rng.next_u64());
        inst.problem = std::make_unique<gnc::GncProblem>(s.instance);
        break;
      }
      case ProblemKind::kHc: {
        auto target = std::make_shared<const poly::PolynomialSystem>(hc_system(task.instance, rng));
        const poly::StartSystem start = poly::total_degree_start(*target, rng.next_u64());
        hc::Homotopy h{std::make_shared<const poly::PolynomialSystem>(start.system), target, hc::random_gamma(rng)};
        inst.problem = std::make_unique<hc::HcProblem>(h, start.roots[rng.below(start.roots.size())]);
        break;
      }
      case ProblemKind::kAld: {
        const ald::TargetDistribution dist = ald_target(task.instance, rng);
        const ald::AldConfig cfg = ald::default_config(dist);
        inst.problem = std::make_unique<ald::AldProblem>(dist, cfg, ald::sample_source(dist, cfg.n_particles, rng));
        break;
      }
    }
    return inst;
  };
}

ControllerFactory sweep_factory(ProblemKind kind, int levels, double budget) {
  if (levels < 2) throw ConfigError("sweep levels must be >= 2");
  switch (kind) {
    case ProblemKind::kGh:
    case ProblemKind::kAld: {
      const int iters = std::max(1, static_cast<int>(std::lround(budget)));
      return [levels, iters] { return std::make_unique<UniformController>(levels, CorrectorBudget::MaxIters(iters)); };
    }
    case ProblemKind::kGnc: {
      const double u0 = std::ldexp(1.0, -10);
      const double factor = std::pow(1.0 / u0, 1.0 / (levels - 1));
      return [u0, factor, budget] {
        return std::make_unique<GeometricController>(u0, factor, CorrectorBudget::Tolerance(budget));
      };
    }
    case ProblemKind::kHc:
      return [levels, budget] {
        return std::make_unique<AdaptiveStepController>(1.0 / levels, CorrectorBudget::Tolerance(budget));
      };
  }
  throw ConfigError("sweep: unknown problem kind");
}

std::vector<int> sweep_levels(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kGnc:
      return {4, 6, 8, 11, 16};
    case ProblemKind::kGh:
      return {10, 20, 30, 50, 80};
    case ProblemKind::kHc:
      return {5, 10, 20, 40, 80};
    case ProblemKind::kAld:
      return {10, 20, 41, 60, 80};
  }
  return {};
}

std::vector<double> sweep_budgets(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kGnc:
      return {1e-2, 1e-3, 1e-4, 1e-6, 1e-8};
    case ProblemKind::kHc:
      return {1e-4, 1e-6, 1e-8, 1e-10, 1e-12};
    case ProblemKind::kGh:
    case ProblemKind::kAld:
      return {2, 5, 10, 15, 20};
  }
  return {};
}

std::vector<SweepPoint> run_sweep(const Task& task, const std::vector<int>& levels, const std::vector<double>& budgets,
                                  std::uint64_t master_seed, int trials, int threads) {
  Task t = task;
  // Long schedules must not be cut by the policy-sized ceiling.
  t.limits.t_max = 1000000;
  std::vector<SweepPoint> out;
  const std::size_t nm = metric_names(task.kind).size();
  for (int l : levels)
    for (double b : budgets) {
      SweepPoint p;
      p.levels = l;
      p.budget = b;
      p.result = aggregate(run_trials(t, sweep_factory(task.kind, l, b), master_seed, trials, threads), nm);
      out.push_back(p);
    }
  return out;
}

}  // namespace npc::exp
