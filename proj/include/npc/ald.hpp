#pragma once

// Annealed Langevin dynamics: target potentials, the annealed energy between
// an isotropic Gaussian source and the target, an unadjusted Langevin
// corrector over particle sets, and sample-quality metrics.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "npc/engine.hpp"
#include "npc/linalg.hpp"

namespace npc::ald {

/// N x dim, one particle per row.
using ParticleSet = linalg::RealMatrix;

enum class TargetKind { kGmm, kFunnel, kDw4 };

struct TargetDistribution {
  TargetKind kind = TargetKind::kGmm;
  int dim = 2;
  std::vector<std::vector<double>> means;  // gmm
  double funnel_sigma = 3.0;
  double dw4_tau = 1.0;
  double dw4_a = 0.0;
  double dw4_b = -4.0;
  double dw4_c = 0.9;
  double dw4_d0 = 4.0;
  /// Standard deviation of the Gaussian source at u = 0.
  double source_scale = 1.0;

  std::string name() const;
};

/// Energy g(x) = -log density (up to a constant for dw4); writes the
/// gradient. Returns true in `coincident` when a dw4 pair distance was zero.
double potential_and_grad(const TargetDistribution& dist, std::span<const double> x, std::span<double> grad,
                          bool* coincident = nullptr);
double potential(const TargetDistribution& dist, std::span<const double> x);

/// Gradient of (1 - u) |x|^2 / (2 s^2) + u g(x).
std::vector<double> annealed_energy_grad(const TargetDistribution& dist, double u, std::span<const double> x);

struct LangevinStats {
  int clamped = 0;      // non-finite particles reset into the sampling box
  int coincident = 0;   // dw4 evaluations with a zero pair distance
};

/// x <- x - (xi / 2) grad H(x, u) + sqrt(xi) n, n ~ N(0, I).
ParticleSet langevin_correct_once(const ParticleSet& particles, const TargetDistribution& dist, double u, double xi,
                                  SeededRng& rng, LangevinStats* stats = nullptr, double box = 100.0);

/// Writes the score (minus the energy gradient) at x.
using ScoreFn = std::function<void(std::span<const double> x, std::span<double> score)>;

ScoreFn target_score(const TargetDistribution& dist);
ScoreFn annealed_score(const TargetDistribution& dist, double u);

/// Median pairwise Euclidean distance. Throws InvalidBandwidth when zero.
double median_heuristic(const ParticleSet& particles);

/// V-statistic kernelized Stein discrepancy with the RBF kernel
/// exp(-|x - y|^2 / (2 h^2)). Returns the mean of u_q over all ordered pairs.
double ksd(const ParticleSet& particles, const ScoreFn& score, std::optional<double> bandwidth = std::nullopt);
double ksd(const ParticleSet& particles, const TargetDistribution& dist, std::optional<double> bandwidth = std::nullopt);

/// Optimal assignment minimizing the total cost of a square matrix.
/// Returns the column assigned to each row.
std::vector<std::size_t> hungarian(const linalg::RealMatrix& cost);

/// Exact W2 between equal-size empirical measures.
double w2(const ParticleSet& a, const ParticleSet& b);

struct TargetSpec {
  TargetKind kind = TargetKind::kGmm;
  int modes = 40;
};

/// Accepts gmm (40 modes), gmm<k>, funnel, dw4.
TargetSpec parse_target_spec(const std::string& text);

/// gmm: k means uniform in [-40, 40]^2; funnel: d = 10, sigma = 3; dw4: four
/// particles in the plane.
TargetDistribution make_target(const TargetSpec& spec, std::uint64_t seed);

bool has_exact_sampler(const TargetDistribution& dist);
/// Throws PreconditionError when no exact sampler exists.
ParticleSet sample_target(const TargetDistribution& dist, std::size_t n, SeededRng& rng);
ParticleSet sample_source(const TargetDistribution& dist, std::size_t n, SeededRng& rng);

/// Langevin step size: 0.05 for 2-d targets, 0.01 otherwise.
double default_step_size(const TargetDistribution& dist);

/// One particle per row, comma separated, with a header x0,x1,...
void write_particles_csv(const ParticleSet& particles, const std::filesystem::path& path);

struct AldConfig {
  std::size_t n_particles = 512;
  double xi = 0.05;
  std::size_t ksd_subsample = 256;
  double box = 100.0;
};

AldConfig default_config(const TargetDistribution& dist);

/// HomotopyProblem adapter. Criterion: KSD of a fixed particle subsample
/// against the annealed target at u. Target metric: KSD against the target.
class AldProblem : public HomotopyProblem {
 public:
  AldProblem(TargetDistribution dist, AldConfig config, ParticleSet initial);

  ProblemKind kind() const override { return ProblemKind::kAld; }
  double homotopy_value(double u) const override;
  void predict(double from_u, double to_u, SeededRng& rng) override;
  double correct_once(double u, SeededRng& rng) override;
  double criterion(double u, SeededRng& rng) override;
  double target_metric() const override;
  CorrectorBudget warmup_budget() const override { return CorrectorBudget::MaxIters(0); }
  std::vector<double> solution() const override;

  const ParticleSet& particles() const { return particles_; }
  const LangevinStats& stats() const { return stats_; }

 private:
  ParticleSet subsample() const;

  TargetDistribution dist_;
  AldConfig config_;
  ParticleSet particles_;
  LangevinStats stats_;
};

}  // namespace npc::ald
