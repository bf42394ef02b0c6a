#pragma once

// Gaussian homotopy for global minimization: Monte-Carlo smoothing,
// zeroth-order gradients, and a heavy-ball momentum corrector.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "npc/engine.hpp"
#include "npc/errors.hpp"
#include "npc/rng.hpp"

namespace npc::gh {

enum class FunctionKind { kAckley, kHimmelblau, kRastrigin, kSphere };

/// Benchmark objective with global minimum value 0. Ackley's amplitude
/// constants are parameters so training can randomize them.
struct BenchmarkFunction {
  FunctionKind kind = FunctionKind::kAckley;
  int dimension = 2;
  double ackley_a = 20.0;
  double ackley_b = 0.2;

  static BenchmarkFunction ackley(int n, double a = 20.0, double b = 0.2) { return {FunctionKind::kAckley, n, a, b}; }
  static BenchmarkFunction himmelblau() { return {FunctionKind::kHimmelblau, 2}; }
  static BenchmarkFunction rastrigin() { return {FunctionKind::kRastrigin, 2}; }
  static BenchmarkFunction sphere(int n) { return {FunctionKind::kSphere, n}; }

  std::string name() const;
};

/// Accepts ackley, ackley10, himmelblau, rastrigin, sphere.
BenchmarkFunction parse_benchmark(const std::string& name);

double eval_benchmark(const BenchmarkFunction& fn, std::span<const double> x);
std::vector<double> benchmark_gradient(const BenchmarkFunction& fn, std::span<const double> x);

using Objective = std::function<double(std::span<const double>)>;

/// E_{s ~ N(0, I)}[g(x + b s)] estimated with M draws; b = 0 returns g(x).
double smoothed_value(const Objective& g, std::span<const double> x, double bandwidth, int samples, SeededRng& rng);
double smoothed_value(const BenchmarkFunction& fn, std::span<const double> x, double bandwidth, int samples,
                      SeededRng& rng);

/// (1/M) sum_j (g(x + b s_j) - g(x)) s_j / b. Throws InvalidBandwidth for b <= 0.
std::vector<double> zo_gradient(const Objective& g, std::span<const double> x, double bandwidth, int samples,
                                SeededRng& rng);
std::vector<double> zo_gradient(const BenchmarkFunction& fn, std::span<const double> x, double bandwidth, int samples,
                                SeededRng& rng);

/// Two-sided estimator (g(x + b s) - g(x - b s)) s / 2b over `samples` / 2 antithetic pairs.
std::vector<double> zo_gradient_antithetic(const Objective& g, std::span<const double> x, double bandwidth,
                                           int samples, SeededRng& rng);

struct GhConfig {
  double sigma_max = 2.0;
  int mc_samples = 256;
  double alpha = 0.01;
  double beta = 0.8;
  bool antithetic = true;
};

/// Bandwidth schedule sigma_max for 2-d problems, 1 for 10-d Ackley.
GhConfig default_config(const BenchmarkFunction& fn);

struct MomentumState {
  std::vector<double> x;
  std::vector<double> v;
};

/// v <- grad + beta v; x <- x - alpha v.
MomentumState momentum_correct_once(const MomentumState& state, std::span<const double> grad, double alpha,
                                    double beta);

/// (1 - u) sigma_max; u = 0 is the smoothest problem.
double bandwidth_of_level(double u, double sigma_max);

/// HomotopyProblem adapter. Criterion: Euclidean norm of the gradient used by
/// the step. At u = 1 the exact gradient of g replaces the estimator.
class GhProblem : public HomotopyProblem {
 public:
  GhProblem(BenchmarkFunction fn, GhConfig config, std::vector<double> x0);

  ProblemKind kind() const override { return ProblemKind::kGh; }
  double parameter_of_level(double u) const override { return bandwidth_of_level(u, config_.sigma_max); }
  double homotopy_value(double u) const override;
  void predict(double from_u, double to_u, SeededRng& rng) override;
  double correct_once(double u, SeededRng& rng) override;
  double criterion(double u, SeededRng& rng) override;
  double target_metric() const override;
  CorrectorBudget warmup_budget() const override { return CorrectorBudget::MaxIters(1); }
  std::vector<double> solution() const override { return state_.x; }

  const BenchmarkFunction& function() const { return fn_; }

 private:
  std::vector<double> gradient_at(double u, SeededRng& rng) const;

  BenchmarkFunction fn_;
  GhConfig config_;
  MomentumState state_;
};

}  // namespace npc::gh
