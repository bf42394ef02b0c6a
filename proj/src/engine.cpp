#include "npc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "npc/errors.hpp"

namespace npc {

const char* to_string(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kGnc:
      return "gnc";
    case ProblemKind::kGh:
      return "gh";
    case ProblemKind::kHc:
      return "hc";
    case ProblemKind::kAld:
      return "ald";
  }
  return "unknown";
}

ProblemKind parse_problem_kind(const std::string& name) {
  if (name == "gnc") return ProblemKind::kGnc;
  if (name == "gh") return ProblemKind::kGh;
  if (name == "hc") return ProblemKind::kHc;
  if (name == "ald") return ProblemKind::kAld;
  throw ConfigError("unknown problem kind '" + name + "' (expected gnc, gh, hc or ald)");
}

const char* to_string(BudgetVariant variant) {
  return variant == BudgetVariant::kTolerance ? "tolerance" : "max_iters";
}

double compute_convergence_velocity(double prev_metric, double cur_metric) {
  constexpr double kGuard = 1e-12;
  return (prev_metric - cur_metric) / (std::abs(prev_metric) + kGuard);
}

CorrectorResult run_corrector(HomotopyProblem& problem, double u, const CorrectorBudget& budget, int cap,
                              SeededRng& rng) {
  CorrectorResult result;
  try {
    if (budget.variant == BudgetVariant::kTolerance) {
      result.attained = problem.criterion(u, rng);
      while (!std::isnan(result.attained) && result.attained > budget.tolerance && result.iters < cap) {
        result.attained = problem.correct_once(u, rng);
        ++result.iters;
      }
    } else {
      const int steps = std::min(budget.max_iters, cap);
      for (; result.iters < steps; ++result.iters) problem.correct_once(u, rng);
      result.attained = problem.criterion(u, rng);
    }
  } catch (const CorrectorFailure& e) {
    result.failed = true;
    result.failure = e.what();
    // The failing step did work; count it.
    ++result.iters;
    return result;
  }
  if (std::isnan(result.attained)) {
    result.failed = true;
    result.failure = "corrector criterion is NaN";
  }
  return result;
}

namespace {

bool state_finite(const SolverState& s) {
  return std::isfinite(s.level) && std::isfinite(s.attained_tolerance) && std::isfinite(s.convergence_velocity);
}

}  // namespace

SolveTrace solve(HomotopyProblem& problem, ScheduleController& controller, const SolveLimits& limits,
                 SeededRng& rng) {
  const auto start = std::chrono::steady_clock::now();
  SolveTrace trace;
  auto finish = [&](bool success, std::string diagnostic) {
    trace.success = success;
    if (!diagnostic.empty()) trace.diagnostic = std::move(diagnostic);
    trace.final_solution = problem.solution();
    trace.wall_time = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
    return trace;
  };
  auto abort_with = [&](std::string why) {
    trace.aborted = true;
    return finish(false, std::move(why));
  };

  // Warm-up at the source problem.
  const CorrectorBudget warm = problem.warmup_budget();
  const int warm_cap = std::min(limits.warmup_cap, limits.t_max);
  CorrectorResult warm_result = run_corrector(problem, 0.0, warm, warm_cap, rng);
  trace.warmup_iters = warm_result.iters;
  trace.total_corrector_iters = warm_result.iters;
  if (warm_result.failed) return abort_with("warm-up corrector failed: " + warm_result.failure);

  double metric_prev = problem.target_metric();
  trace.warmup_metric = metric_prev;
  SolverState state{0.0, warm_result.attained, warm_result.iters, 0.0};
  if (!state_finite(state) || !std::isfinite(metric_prev)) return abort_with("non-finite state after warm-up");
  controller.begin(state);

  double u = 0.0;
  double retry_cap = std::numeric_limits<double>::infinity();
  const bool tolerance_mode = controller.budget_variant() == BudgetVariant::kTolerance;

  while (true) {
    if (trace.total_corrector_iters >= limits.t_max) return finish(false, "corrector budget T_max exhausted");

    PcAction action = controller.next_action(state, rng);

    double delta = action.delta_u;
    if (!std::isfinite(delta) || delta < limits.delta_min || delta > limits.delta_max) {
      ++trace.clamp_warnings;
      delta = std::isfinite(delta) ? std::clamp(delta, limits.delta_min, limits.delta_max) : limits.delta_min;
    }
    CorrectorBudget budget = action.budget;
    if (budget.variant == BudgetVariant::kTolerance) {
      if (!(budget.tolerance > 0.0) || !std::isfinite(budget.tolerance)) {
        ++trace.clamp_warnings;
        budget.tolerance = 1e-8;
      }
    } else if (budget.max_iters < 1) {
      ++trace.clamp_warnings;
      budget.max_iters = 1;
    }

    delta = std::min(delta, retry_cap);
    double u_next = u + delta;
    if (u_next >= 1.0 - limits.level_snap) u_next = 1.0;

    if (problem.supports_rollback()) problem.checkpoint();
    problem.predict(u, u_next, rng);

    int cap = limits.per_level_cap;
    if (budget.variant == BudgetVariant::kMaxIters) cap = std::min(cap, budget.max_iters);
    cap = std::min(cap, limits.t_max - trace.total_corrector_iters);

    CorrectorResult res = run_corrector(problem, u_next, budget, cap, rng);
    trace.total_corrector_iters += res.iters;

    const bool unconverged = tolerance_mode && budget.variant == BudgetVariant::kTolerance &&
                             !res.failed && !(res.attained <= budget.tolerance);
    if ((res.failed || unconverged) && problem.supports_rollback()) {
      problem.rollback();
      trace.rejected_iters += res.iters;
      ++trace.rejected_steps;
      controller.on_rejected();
      if (problem.diverged()) return finish(false, "path diverged");
      retry_cap = delta * 0.5;
      if (retry_cap < limits.retry_min) return finish(false, "step size fell below retry_min after rejection");
      continue;
    }
    if (res.failed) return abort_with("corrector failed at u=" + std::to_string(u_next) + ": " + res.failure);

    const double metric = problem.target_metric();
    const double tau = compute_convergence_velocity(metric_prev, metric);
    LevelRecord record{u_next, res.iters, res.attained, tau, metric};
    trace.records.push_back(record);
    state = SolverState{u_next, res.attained, res.iters, tau};
    if (!state_finite(state) || !std::isfinite(metric)) return abort_with("non-finite state at u=" + std::to_string(u_next));
    metric_prev = metric;
    u = u_next;
    retry_cap = std::numeric_limits<double>::infinity();
    controller.on_accepted(state, record);

    if (problem.diverged()) return finish(false, "path diverged");
    if (u >= 1.0) {
      try {
        trace.endgame_iters = problem.finalize(limits.t_max - trace.total_corrector_iters, rng);
      } catch (const CorrectorFailure& e) {
        return finish(false, std::string("endgame failed: ") + e.what());
      }
      trace.total_corrector_iters += trace.endgame_iters;
      const bool reached = problem.target_reached();
      return finish(reached, reached ? "" : "target not reached at u=1");
    }
  }
}

UniformController::UniformController(int levels, CorrectorBudget budget)
    : delta_(1.0 / static_cast<double>(levels)), budget_(budget) {
  if (levels < 1) throw ConfigError("uniform schedule needs at least one level");
}

PcAction UniformController::next_action(const SolverState& /*state*/, SeededRng& /*rng*/) { return {delta_, budget_}; }

GeometricController::GeometricController(double u0, double factor, CorrectorBudget budget)
    : u0_(u0), factor_(factor), budget_(budget) {
  if (!(u0 > 0.0) || !(factor > 1.0)) throw ConfigError("geometric schedule needs u0 > 0 and factor > 1");
}

PcAction GeometricController::next_action(const SolverState& state, SeededRng& /*rng*/) {
  double target = u0_;
  while (target <= state.level * (1.0 + 1e-12) && target < 1.0) target *= factor_;
  target = std::min(target, 1.0);
  return {target - state.level, budget_};
}

AdaptiveStepController::AdaptiveStepController(double initial_delta, CorrectorBudget budget, int grow_after)
    : initial_(initial_delta), delta_(initial_delta), budget_(budget), grow_after_(grow_after) {}

void AdaptiveStepController::begin(const SolverState& /*bootstrap*/) {
  delta_ = initial_;
  streak_ = 0;
}

PcAction AdaptiveStepController::next_action(const SolverState& /*state*/, SeededRng& /*rng*/) {
  return {delta_, budget_};
}

void AdaptiveStepController::on_rejected() {
  delta_ *= 0.5;
  streak_ = 0;
}

void AdaptiveStepController::on_accepted(const SolverState& /*state*/, const LevelRecord& /*record*/) {
  if (++streak_ >= grow_after_ && delta_ < initial_) {
    delta_ = std::min(initial_, delta_ * 2.0);
    streak_ = 0;
  }
}

std::unique_ptr<ScheduleController> classic_controller(ProblemKind kind) {
  switch (kind) {
    case ProblemKind::kGnc:
      return std::make_unique<GeometricController>(std::ldexp(1.0, -10), 2.0, CorrectorBudget::Tolerance(1e-6));
    case ProblemKind::kGh:
      return std::make_unique<UniformController>(50, CorrectorBudget::MaxIters(10));
    case ProblemKind::kHc:
      return std::make_unique<AdaptiveStepController>(0.05, CorrectorBudget::Tolerance(1e-10));
    case ProblemKind::kAld:
      return std::make_unique<UniformController>(41, CorrectorBudget::MaxIters(10));
  }
  throw ConfigError("classic_controller: unknown problem kind");
}

SolveLimits default_limits(ProblemKind kind) {
  SolveLimits limits;
  switch (kind) {
    case ProblemKind::kGnc:
      limits.per_level_cap = 20;
      limits.t_max = 270;
      break;
    case ProblemKind::kGh:
      limits.per_level_cap = 20;
      limits.t_max = 1002;
      break;
    case ProblemKind::kHc:
      limits.per_level_cap = 50;
      limits.t_max = 250;
      break;
    case ProblemKind::kAld:
      limits.per_level_cap = 20;
      limits.t_max = 820;
      break;
  }
  return limits;
}

}  // namespace npc
