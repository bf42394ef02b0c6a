#pragma once

// Problem-agnostic predictor-corrector loop. A backend implements
// HomotopyProblem; a ScheduleController (fixed classic schedule or learned
// policy) chooses how far to advance the homotopy level and how much
// corrector work to spend at each level.

#include <array>
#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "npc/rng.hpp"

namespace npc {

enum class ProblemKind { kGnc, kGh, kHc, kAld };

const char* to_string(ProblemKind kind);
/// Accepts "gnc", "gh", "hc", "ald". Throws ConfigError otherwise.
ProblemKind parse_problem_kind(const std::string& name);

enum class BudgetVariant { kTolerance, kMaxIters };

const char* to_string(BudgetVariant variant);

/// How long the corrector runs at one level.
struct CorrectorBudget {
  BudgetVariant variant = BudgetVariant::kMaxIters;
  double tolerance = 0.0;
  int max_iters = 1;

  static CorrectorBudget Tolerance(double eps) { return {BudgetVariant::kTolerance, eps, 0}; }
  static CorrectorBudget MaxIters(int n) { return {BudgetVariant::kMaxIters, 0.0, n}; }
};

/// Observation handed to the controller before each predictor step.
struct SolverState {
  double level = 0.0;
  double attained_tolerance = 0.0;
  int corrector_iters = 0;
  double convergence_velocity = 0.0;
};

struct PcAction {
  double delta_u = 0.0;
  CorrectorBudget budget;
};

struct LevelRecord {
  double level = 0.0;
  int iters = 0;
  double attained = 0.0;
  double velocity = 0.0;
  double target_metric = 0.0;
};

struct SolveTrace {
  std::vector<LevelRecord> records;
  /// Iterations spent by the warm-up corrector at u = 0 (not a level record).
  int warmup_iters = 0;
  /// Target metric after warm-up.
  double warmup_metric = 0.0;
  /// Iterations spent on predictor steps that were rolled back.
  int rejected_iters = 0;
  int rejected_steps = 0;
  /// Iterations spent by the problem's endgame after reaching u = 1.
  int endgame_iters = 0;
  /// warmup_iters + rejected_iters + endgame_iters + sum of records[i].iters.
  int total_corrector_iters = 0;
  int clamp_warnings = 0;
  std::chrono::nanoseconds wall_time{0};
  bool success = false;
  bool aborted = false;
  std::string diagnostic;
  std::vector<double> final_solution;
};

/// A homotopy H(x, u) with u = 0 the easy source problem and u = 1 the target.
/// The problem owns its current solution estimate.
class HomotopyProblem {
 public:
  virtual ~HomotopyProblem() = default;

  virtual ProblemKind kind() const = 0;

  /// Map the canonical level to the backend's own homotopy parameter.
  virtual double parameter_of_level(double u) const { return u; }

  /// Scalar value of the homotopy at the current solution.
  virtual double homotopy_value(double u) const = 0;

  /// Predictor hook, called after the level advanced from `from_u` to `to_u`.
  virtual void predict(double from_u, double to_u, SeededRng& rng) = 0;

  /// One corrector step at level u. Returns the convergence criterion
  /// observed by that step. May throw CorrectorFailure.
  virtual double correct_once(double u, SeededRng& rng) = 0;

  /// Evaluates the convergence criterion at the current solution without
  /// moving it.
  virtual double criterion(double u, SeededRng& rng) = 0;

  /// Optimality metric of the target problem (u = 1) at the current
  /// solution. Drives the convergence velocity.
  virtual double target_metric() const = 0;

  /// Whether the current solution solves the target (checked at u = 1).
  virtual bool target_reached() const { return true; }

  /// True when the solution left every region where tracking makes sense.
  virtual bool diverged() const { return false; }

  /// Rollback support for rejected predictor steps.
  virtual bool supports_rollback() const { return false; }
  virtual void checkpoint() {}
  virtual void rollback() {}

  /// Warm-up budget at u = 0.
  virtual CorrectorBudget warmup_budget() const { return CorrectorBudget::Tolerance(1e-8); }

  /// Extra refinement once u = 1 is accepted, using at most `budget`
  /// iterations. Returns iterations spent.
  virtual int finalize(int /*budget*/, SeededRng& /*rng*/) { return 0; }

  virtual std::vector<double> solution() const = 0;
};

class ScheduleController {
 public:
  virtual ~ScheduleController() = default;

  virtual BudgetVariant budget_variant() const = 0;

  /// Called once after warm-up with the bootstrap state.
  virtual void begin(const SolverState& /*bootstrap*/) {}

  virtual PcAction next_action(const SolverState& state, SeededRng& rng) = 0;

  /// The level proposed by the last action was rejected and rolled back.
  virtual void on_rejected() {}

  /// The last action produced an accepted level.
  virtual void on_accepted(const SolverState& /*state*/, const LevelRecord& /*record*/) {}
};

struct SolveLimits {
  /// Global corrector-iteration ceiling.
  int t_max = 1000;
  int per_level_cap = 100;
  double delta_min = 1e-3;
  double delta_max = 0.5;
  /// Floor for the step halving that follows a rollback.
  double retry_min = 1e-6;
  int warmup_cap = 100;
  /// Levels within this distance of 1 snap to 1.
  double level_snap = 1e-9;
};

struct CorrectorResult {
  int iters = 0;
  double attained = 0.0;
  bool failed = false;
  std::string failure;
};

/// Runs the problem's corrector at level u. Tolerance budgets stop once the
/// criterion is at or below eps (checked on entry too); MaxIters budgets run
/// exactly min(i_max, cap) steps and report a fresh criterion evaluation.
CorrectorResult run_corrector(HomotopyProblem& problem, double u, const CorrectorBudget& budget, int cap,
                              SeededRng& rng);

/// Relative change of the target metric between two consecutive levels;
/// positive when the metric improved (decreased).
double compute_convergence_velocity(double prev_metric, double cur_metric);

SolveTrace solve(HomotopyProblem& problem, ScheduleController& controller, const SolveLimits& limits,
                 SeededRng& rng);

/// Fixed uniform schedule: `levels` equal steps with one budget throughout.
class UniformController : public ScheduleController {
 public:
  UniformController(int levels, CorrectorBudget budget);

  BudgetVariant budget_variant() const override { return budget_.variant; }
  PcAction next_action(const SolverState& state, SeededRng& rng) override;

 private:
  double delta_;
  CorrectorBudget budget_;
};

/// Geometric schedule u_k = min(1, u0 * factor^k).
class GeometricController : public ScheduleController {
 public:
  GeometricController(double u0, double factor, CorrectorBudget budget);

  BudgetVariant budget_variant() const override { return budget_.variant; }
  PcAction next_action(const SolverState& state, SeededRng& rng) override;

 private:
  double u0_;
  double factor_;
  CorrectorBudget budget_;
};

/// Step-size control for path tracking: start at `initial_delta`, halve on
/// every rejected step, double back toward the initial size after
/// `grow_after` consecutive accepted steps.
class AdaptiveStepController : public ScheduleController {
 public:
  AdaptiveStepController(double initial_delta, CorrectorBudget budget, int grow_after = 3);

  BudgetVariant budget_variant() const override { return budget_.variant; }
  void begin(const SolverState& bootstrap) override;
  PcAction next_action(const SolverState& state, SeededRng& rng) override;
  void on_rejected() override;
  void on_accepted(const SolverState& state, const LevelRecord& record) override;

  double current_delta() const { return delta_; }

 private:
  double initial_;
  double delta_;
  CorrectorBudget budget_;
  int grow_after_;
  int streak_ = 0;
};

/// The hand-tuned baseline schedule of each backend.
std::unique_ptr<ScheduleController> classic_controller(ProblemKind kind);

/// Default solve limits per problem kind (T_max is twice the classic total).
SolveLimits default_limits(ProblemKind kind);

}  // namespace npc
