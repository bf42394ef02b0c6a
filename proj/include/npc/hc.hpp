#pragma once

// Homotopy continuation for square polynomial systems. Linear homotopy
// H(x, t) = (1 - t) gamma f(x) + t g(x) from a start system f to a target g,
// Pade [2/1] predictor built from third-order Taylor data, Newton corrector.

#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "npc/engine.hpp"
#include "npc/polynomial.hpp"

namespace npc::hc {

using linalg::Complex;
using poly::CVector;
using poly::PolynomialSystem;

/// Start/target pair with the gamma constant of one tracking run.
struct Homotopy {
  std::shared_ptr<const PolynomialSystem> start;
  std::shared_ptr<const PolynomialSystem> target;
  Complex gamma{1.0, 0.0};

  std::size_t dimension() const { return static_cast<std::size_t>(target->n_vars()); }
};

/// Uniform point on the unit circle.
Complex random_gamma(SeededRng& rng);

struct HomotopyValue {
  CVector value;
  linalg::ComplexMatrix jacobian;
};

HomotopyValue homotopy_eval(const Homotopy& h, const CVector& x, double t);

struct TaylorData {
  CVector c0, c1, c2, c3;
};

/// Throws SingularMatrix when H_x is singular at (x, t). Uses one LU.
TaylorData taylor_coefficients(const Homotopy& h, const CVector& x, double t);

struct Prediction {
  CVector x;
  std::vector<bool> fallback;  // per component: power series used
  bool any_fallback() const;
};

Prediction pade_predict(const TaylorData& data, double dt);
CVector power_series_predict(const TaylorData& data, double dt);

struct PathState {
  CVector x;
  double t = 0.0;
  double residual = 0.0;  // ||H(x, t)||_inf
};

struct NewtonStep {
  PathState state;
  double step_norm = 0.0;  // ||dx||_inf
};

/// Throws SingularMatrix.
NewtonStep newton_correct_once(const Homotopy& h, const PathState& state);

struct HcConfig {
  double divergence_bound = 1e6;
  double success_residual = 1e-8;
  int endgame_iters = 5;
  double endgame_tolerance = 1e-12;
  double contraction = 0.5;  // required Newton step ratio
  double predictor_tolerance = 3e-2;  // Pade vs Taylor disagreement, relative
};

/// HomotopyProblem adapter tracking one path. Criterion: ||dx||_inf of the
/// pending Newton step. Target metric: ||g(x)||_inf.
class HcProblem : public HomotopyProblem {
 public:
  HcProblem(Homotopy h, CVector start_root, HcConfig config = {});

  ProblemKind kind() const override { return ProblemKind::kHc; }
  double homotopy_value(double u) const override;
  void predict(double from_u, double to_u, SeededRng& rng) override;
  double correct_once(double u, SeededRng& rng) override;
  double criterion(double u, SeededRng& rng) override;
  double target_metric() const override;
  bool target_reached() const override;
  bool diverged() const override;
  bool supports_rollback() const override { return true; }
  void checkpoint() override;
  void rollback() override;
  int finalize(int budget, SeededRng& rng) override;
  std::vector<double> solution() const override;

  const CVector& x() const { return x_; }
  double target_residual() const;
  int pade_fallbacks() const { return pade_fallbacks_; }

 private:
  double pending_step(double u);

  Homotopy h_;
  HcConfig config_;
  CVector x_;
  CVector saved_x_;
  bool predict_failed_ = false;
  std::optional<CVector> pending_dx_;
  double pending_u_ = -1.0;
  double last_step_ = -1.0;
  int pade_fallbacks_ = 0;
};

struct TrackResult {
  CVector root;
  SolveTrace trace;
  bool success = false;
  int pade_fallbacks = 0;
};

/// Throws PreconditionError when the start root misses the start system by
/// more than 1e-10.
TrackResult track_path(const Homotopy& h, const CVector& start_root, ScheduleController& controller,
                       const SolveLimits& limits, SeededRng& rng, HcConfig config = {});

struct SolveAllResult {
  std::vector<TrackResult> paths;
  std::vector<CVector> distinct_roots;  // success-flagged, deduplicated
  int successes = 0;
};

using ControllerFactory = std::function<std::unique_ptr<ScheduleController>()>;

/// Tracks every start root with one gamma. Distinct roots are merged within
/// `dedup_tol` in the infinity norm.
SolveAllResult solve_all(const PolynomialSystem& target, const poly::StartSystem& start, Complex gamma,
                         const ControllerFactory& make_controller, const SolveLimits& limits, std::uint64_t seed,
                         double dedup_tol = 1e-6);

/// Sorts roots lexicographically by rounded real/imaginary parts.
std::vector<CVector> sorted_roots(std::vector<CVector> roots);

}  // namespace npc::hc
