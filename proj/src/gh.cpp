#include "npc/gh.hpp"

#include <cmath>
#include <numbers>

#include "npc/linalg.hpp"

namespace npc::gh {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

void check_dim(const BenchmarkFunction& fn, std::span<const double> x) {
  if (static_cast<int>(x.size()) != fn.dimension) throw PreconditionError("benchmark: dimension mismatch");
}

}  // namespace

std::string BenchmarkFunction::name() const {
  switch (kind) {
    case FunctionKind::kAckley:
      return dimension == 2 ? "ackley" : "ackley" + std::to_string(dimension);
    case FunctionKind::kHimmelblau:
      return "himmelblau";
    case FunctionKind::kRastrigin:
      return "rastrigin";
    case FunctionKind::kSphere:
      return "sphere";
  }
  return "unknown";
}

BenchmarkFunction parse_benchmark(const std::string& name) {
  if (name == "ackley" || name == "ackley2") return BenchmarkFunction::ackley(2);
  if (name == "ackley10") return BenchmarkFunction::ackley(10);
  if (name == "himmelblau") return BenchmarkFunction::himmelblau();
  if (name == "rastrigin") return BenchmarkFunction::rastrigin();
  if (name == "sphere") return BenchmarkFunction::sphere(2);
  throw ConfigError("unknown benchmark function '" + name + "'");
}

double eval_benchmark(const BenchmarkFunction& fn, std::span<const double> x) {
  check_dim(fn, x);
  switch (fn.kind) {
    case FunctionKind::kAckley: {
      const double n = static_cast<double>(x.size());
      double sq = 0.0, cs = 0.0;
      for (double xi : x) {
        sq += xi * xi;
        cs += std::cos(kTwoPi * xi);
      }
      return -fn.ackley_a * std::exp(-fn.ackley_b * std::sqrt(sq / n)) - std::exp(cs / n) + fn.ackley_a +
             std::numbers::e;
    }
    case FunctionKind::kHimmelblau: {
      const double a = x[0] * x[0] + x[1] - 11.0;
      const double b = x[0] + x[1] * x[1] - 7.0;
      return a * a + b * b;
    }
    case FunctionKind::kRastrigin:
      return 10.0 + x[0] * x[0] + x[1] * x[1] - 9.0 * std::cos(kTwoPi * x[0]) - std::cos(kTwoPi * x[1]);
    case FunctionKind::kSphere: {
      double s = 0.0;
      for (double xi : x) s += xi * xi;
      return s;
    }
  }
  return 0.0;
}

std::vector<double> benchmark_gradient(const BenchmarkFunction& fn, std::span<const double> x) {
  check_dim(fn, x);
  std::vector<double> g(x.size(), 0.0);
  switch (fn.kind) {
    case FunctionKind::kAckley: {
      const double n = static_cast<double>(x.size());
      double sq = 0.0, cs = 0.0;
      for (double xi : x) {
        sq += xi * xi;
        cs += std::cos(kTwoPi * xi);
      }
      const double rms = std::sqrt(sq / n);
      const double e1 = std::exp(-fn.ackley_b * rms);
      const double e2 = std::exp(cs / n);
      for (std::size_t i = 0; i < x.size(); ++i) {
        // The radial term is not differentiable at the origin; use the zero subgradient there.
        const double radial = rms > 0.0 ? fn.ackley_a * fn.ackley_b * e1 * x[i] / (n * rms) : 0.0;
        g[i] = radial + e2 * kTwoPi * std::sin(kTwoPi * x[i]) / n;
      }
      break;
    }
    case FunctionKind::kHimmelblau: {
      const double a = x[0] * x[0] + x[1] - 11.0;
      const double b = x[0] + x[1] * x[1] - 7.0;
      g[0] = 4.0 * x[0] * a + 2.0 * b;
      g[1] = 2.0 * a + 4.0 * x[1] * b;
      break;
    }
    case FunctionKind::kRastrigin:
      g[0] = 2.0 * x[0] + 9.0 * kTwoPi * std::sin(kTwoPi * x[0]);
      g[1] = 2.0 * x[1] + kTwoPi * std::sin(kTwoPi * x[1]);
      break;
    case FunctionKind::kSphere:
      for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i];
      break;
  }
  return g;
}

double smoothed_value(const Objective& g, std::span<const double> x, double bandwidth, int samples, SeededRng& rng) {
  if (bandwidth < 0.0) throw InvalidBandwidth("smoothed_value: negative bandwidth");
  if (samples < 1) throw PreconditionError("smoothed_value: need at least one sample");
  if (bandwidth == 0.0) return g(x);
  std::vector<double> probe(x.size());
  double total = 0.0;
  for (int j = 0; j < samples; ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) probe[i] = x[i] + bandwidth * rng.normal();
    total += g(probe);
  }
  return total / samples;
}

double smoothed_value(const BenchmarkFunction& fn, std::span<const double> x, double bandwidth, int samples,
                      SeededRng& rng) {
  check_dim(fn, x);
  return smoothed_value([&fn](std::span<const double> p) { return eval_benchmark(fn, p); }, x, bandwidth, samples,
                        rng);
}

std::vector<double> zo_gradient(const Objective& g, std::span<const double> x, double bandwidth, int samples,
                                SeededRng& rng) {
  if (!(bandwidth > 0.0)) throw InvalidBandwidth("zo_gradient: bandwidth must be positive");
  if (samples < 1) throw PreconditionError("zo_gradient: need at least one sample");
  const double g0 = g(x);
  std::vector<double> grad(x.size(), 0.0), sigma(x.size()), probe(x.size());
  for (int j = 0; j < samples; ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      sigma[i] = rng.normal();
      probe[i] = x[i] + bandwidth * sigma[i];
    }
    const double diff = g(probe) - g0;
    for (std::size_t i = 0; i < x.size(); ++i) grad[i] += diff * sigma[i];
  }
  const double scale = 1.0 / (static_cast<double>(samples) * bandwidth);
  for (double& gi : grad) gi *= scale;
  return grad;
}

std::vector<double> zo_gradient_antithetic(const Objective& g, std::span<const double> x, double bandwidth,
                                           int samples, SeededRng& rng) {
  if (!(bandwidth > 0.0)) throw InvalidBandwidth("zo_gradient: bandwidth must be positive");
  if (samples < 1) throw PreconditionError("zo_gradient: need at least one sample");
  const int pairs = std::max(1, samples / 2);
  std::vector<double> grad(x.size(), 0.0), sigma(x.size()), plus(x.size()), minus(x.size());
  for (int j = 0; j < pairs; ++j) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      sigma[i] = rng.normal();
      plus[i] = x[i] + bandwidth * sigma[i];
      minus[i] = x[i] - bandwidth * sigma[i];
    }
    const double diff = g(plus) - g(minus);
    for (std::size_t i = 0; i < x.size(); ++i) grad[i] += diff * sigma[i];
  }
  const double scale = 1.0 / (2.0 * static_cast<double>(pairs) * bandwidth);
  for (double& gi : grad) gi *= scale;
  return grad;
}

std::vector<double> zo_gradient(const BenchmarkFunction& fn, std::span<const double> x, double bandwidth, int samples,
                                SeededRng& rng) {
  check_dim(fn, x);
  return zo_gradient([&fn](std::span<const double> p) { return eval_benchmark(fn, p); }, x, bandwidth, samples, rng);
}

GhConfig default_config(const BenchmarkFunction& fn) {
  GhConfig cfg;
  cfg.sigma_max = fn.dimension > 2 ? 1.0 : 2.0;
  return cfg;
}

MomentumState momentum_correct_once(const MomentumState& state, std::span<const double> grad, double alpha,
                                    double beta) {
  MomentumState next = state;
  for (std::size_t i = 0; i < next.x.size(); ++i) {
    next.v[i] = grad[i] + beta * state.v[i];
    next.x[i] = state.x[i] - alpha * next.v[i];
  }
  return next;
}

double bandwidth_of_level(double u, double sigma_max) { return (1.0 - u) * sigma_max; }

GhProblem::GhProblem(BenchmarkFunction fn, GhConfig config, std::vector<double> x0)
    : fn_(fn), config_(config), state_{std::move(x0), {}} {
  if (static_cast<int>(state_.x.size()) != fn_.dimension) throw PreconditionError("GhProblem: x0 dimension mismatch");
  state_.v.assign(state_.x.size(), 0.0);
}

double GhProblem::homotopy_value(double u) const {
  const double b = bandwidth_of_level(u, config_.sigma_max);
  // Deterministic stream so repeated queries agree.
  SeededRng rng(0x5eed);
  return smoothed_value(fn_, state_.x, b, config_.mc_samples, rng);
}

void GhProblem::predict(double /*from_u*/, double /*to_u*/, SeededRng& /*rng*/) {}

std::vector<double> GhProblem::gradient_at(double u, SeededRng& rng) const {
  const double b = bandwidth_of_level(u, config_.sigma_max);
  if (b <= 0.0) return benchmark_gradient(fn_, state_.x);
  if (!config_.antithetic) return zo_gradient(fn_, state_.x, b, config_.mc_samples, rng);
  const auto g = [this](std::span<const double> p) { return eval_benchmark(fn_, p); };
  return zo_gradient_antithetic(g, state_.x, b, config_.mc_samples, rng);
}

double GhProblem::correct_once(double u, SeededRng& rng) {
  const std::vector<double> grad = gradient_at(u, rng);
  state_ = momentum_correct_once(state_, grad, config_.alpha, config_.beta);
  return linalg::norm2(grad);
}

double GhProblem::criterion(double u, SeededRng& rng) { return linalg::norm2(gradient_at(u, rng)); }

double GhProblem::target_metric() const { return eval_benchmark(fn_, state_.x); }

}  // namespace npc::gh
