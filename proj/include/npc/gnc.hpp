#pragma once

// Graduated non-convexity for robust point-cloud registration with the
// Geman-McClure kernel. The predictor is the closed-form weight update of the
// Black-Rangarajan reformulation; the corrector is weighted Gauss-Newton.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "npc/engine.hpp"

namespace npc::gnc {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

/// Axis-angle rotation plus translation.
struct RigidTransform {
  Vec3 rotation{0.0, 0.0, 0.0};
  Vec3 translation{0.0, 0.0, 0.0};

  Mat3 rotation_matrix() const;
  Vec3 apply(const Vec3& p) const;
  std::array<double, 6> params() const;
  static RigidTransform from_params(const std::array<double, 6>& p);
};

/// Rodrigues formula.
Mat3 rotation_from_axis_angle(const Vec3& w);

/// Wraps an axis-angle vector so that its norm is at most pi.
Vec3 canonical_axis_angle(const Vec3& w);

struct RegistrationInstance {
  std::vector<Vec3> source_points;
  std::vector<Vec3> target_points;
  std::vector<bool> inlier_mask;
  double noise_sigma = 0.0;
  double c_bar = 1.0;

  std::size_t size() const { return source_points.size(); }
};

std::vector<double> residual_norms(const RegistrationInstance& instance, const RigidTransform& transform);

/// sum_i c^2 r_i^2 / (c^2 + u r_i^2).
double gm_homotopy_value(const RegistrationInstance& instance, const RigidTransform& transform, double u);

/// w_i = (c^2 / (u r_i^2 + c^2))^2.
std::vector<double> update_weights(const RegistrationInstance& instance, const RigidTransform& transform, double u);

struct GaussNewtonStep {
  RigidTransform transform;
  double step_norm = 0.0;  // infinity norm of the parameter step
};

/// One damped Gauss-Newton step on sum_i w_i r_i^2 with a central-difference
/// Jacobian. Throws DegenerateSystem when every weight is zero or the damped
/// normal matrix is singular.
GaussNewtonStep gauss_newton_correct_once(const RegistrationInstance& instance, const RigidTransform& transform,
                                          const std::vector<double>& weights);

struct SyntheticRegistration {
  RegistrationInstance instance;
  RigidTransform ground_truth;
};

/// Uniform points in [-1,1]^3, a random rigid transform (angle <= pi/2),
/// Gaussian inlier noise truncated at 3 sigma, and a round(ratio * n) subset
/// of targets replaced by uniform points in the scene bounding box.
SyntheticRegistration synth_registration(int n_points, double outlier_ratio, double noise_sigma, std::uint64_t seed);

struct RegistrationErrors {
  double rotation = 0.0;     // radians
  double translation = 0.0;  // scene units
};

RegistrationErrors registration_errors(const RigidTransform& estimate, const RigidTransform& ground_truth);

/// ASCII PLY reader for `element vertex N` with float x, y, z properties.
std::vector<Vec3> load_ply(const std::filesystem::path& path);
std::vector<Vec3> parse_ply(const std::string& text);

/// HomotopyProblem adapter. Convergence criterion: infinity norm of the
/// Gauss-Newton step. Target metric: the Geman-McClure cost at u = 1.
class GncProblem : public HomotopyProblem {
 public:
  explicit GncProblem(RegistrationInstance instance, RigidTransform initial = {});

  ProblemKind kind() const override { return ProblemKind::kGnc; }
  double homotopy_value(double u) const override;
  void predict(double from_u, double to_u, SeededRng& rng) override;
  double correct_once(double u, SeededRng& rng) override;
  double criterion(double u, SeededRng& rng) override;
  double target_metric() const override;
  std::vector<double> solution() const override;

  const RigidTransform& transform() const { return transform_; }
  const std::vector<double>& weights() const { return weights_; }
  const RegistrationInstance& instance() const { return instance_; }

 private:
  RegistrationInstance instance_;
  RigidTransform transform_;
  std::vector<double> weights_;
};

}  // namespace npc::gnc
