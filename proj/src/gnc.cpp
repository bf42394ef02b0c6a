#include "npc/gnc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "npc/errors.hpp"
#include "npc/linalg.hpp"

namespace npc::gnc {

namespace {

double norm(const Vec3& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]); }

Vec3 sub(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

Vec3 mat_vec(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2], m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
          m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

// Stacked 3-vector residuals R p_i + t - q_i.
void stacked_residuals(const RegistrationInstance& inst, const RigidTransform& x, std::vector<double>& out) {
  const Mat3 r = x.rotation_matrix();
  out.resize(3 * inst.size());
  for (std::size_t i = 0; i < inst.size(); ++i) {
    const Vec3 rp = mat_vec(r, inst.source_points[i]);
    for (int k = 0; k < 3; ++k) out[3 * i + k] = rp[k] + x.translation[k] - inst.target_points[i][k];
  }
}

}  // namespace

Mat3 rotation_from_axis_angle(const Vec3& w) {
  const double theta = norm(w);
  // K = [w]_x; R = I + a K + b K^2 with a = sin(theta)/theta, b = (1 - cos(theta))/theta^2.
  double a, b;
  if (theta < 1e-6) {
    const double t2 = theta * theta;
    a = 1.0 - t2 / 6.0;
    b = 0.5 - t2 / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / (theta * theta);
  }
  const Mat3 k{{{0.0, -w[2], w[1]}, {w[2], 0.0, -w[0]}, {-w[1], w[0], 0.0}}};
  Mat3 r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double k2 = 0.0;
      for (int m = 0; m < 3; ++m) k2 += k[i][m] * k[m][j];
      r[i][j] = (i == j ? 1.0 : 0.0) + a * k[i][j] + b * k2;
    }
  }
  return r;
}

Vec3 canonical_axis_angle(const Vec3& w) {
  const double theta = norm(w);
  if (theta <= std::numbers::pi) return w;
  // Rotation by theta about n equals rotation by theta - 2 pi about n.
  double wrapped = std::fmod(theta, 2.0 * std::numbers::pi);
  if (wrapped > std::numbers::pi) wrapped -= 2.0 * std::numbers::pi;
  const double s = wrapped / theta;
  return {w[0] * s, w[1] * s, w[2] * s};
}

Mat3 RigidTransform::rotation_matrix() const { return rotation_from_axis_angle(rotation); }

Vec3 RigidTransform::apply(const Vec3& p) const {
  const Vec3 rp = mat_vec(rotation_matrix(), p);
  return {rp[0] + translation[0], rp[1] + translation[1], rp[2] + translation[2]};
}

std::array<double, 6> RigidTransform::params() const {
  return {rotation[0], rotation[1], rotation[2], translation[0], translation[1], translation[2]};
}

RigidTransform RigidTransform::from_params(const std::array<double, 6>& p) {
  return {{p[0], p[1], p[2]}, {p[3], p[4], p[5]}};
}

std::vector<double> residual_norms(const RegistrationInstance& instance, const RigidTransform& transform) {
  const Mat3 r = transform.rotation_matrix();
  std::vector<double> out(instance.size());
  for (std::size_t i = 0; i < instance.size(); ++i) {
    Vec3 e = mat_vec(r, instance.source_points[i]);
    for (int k = 0; k < 3; ++k) e[k] += transform.translation[k] - instance.target_points[i][k];
    out[i] = norm(e);
  }
  return out;
}

double gm_homotopy_value(const RegistrationInstance& instance, const RigidTransform& transform, double u) {
  const double c2 = instance.c_bar * instance.c_bar;
  double total = 0.0;
  for (double r : residual_norms(instance, transform)) {
    const double r2 = r * r;
    total += c2 * r2 / (c2 + u * r2);
  }
  return total;
}

std::vector<double> update_weights(const RegistrationInstance& instance, const RigidTransform& transform, double u) {
  const double c2 = instance.c_bar * instance.c_bar;
  std::vector<double> w = residual_norms(instance, transform);
  for (double& r : w) {
    const double ratio = c2 / (u * r * r + c2);
    r = ratio * ratio;
  }
  return w;
}

GaussNewtonStep gauss_newton_correct_once(const RegistrationInstance& instance, const RigidTransform& transform,
                                          const std::vector<double>& weights) {
  constexpr double kStep = 1e-6;
  const std::size_t n = instance.size();
  if (weights.size() != n) throw PreconditionError("gauss_newton: one weight per correspondence required");
  if (std::none_of(weights.begin(), weights.end(), [](double w) { return w > 0.0; })) {
    throw DegenerateSystem("gauss_newton: every weight is zero");
  }

  std::vector<double> residuals;
  stacked_residuals(instance, transform, residuals);

  const std::array<double, 6> x0 = transform.params();
  linalg::RealMatrix jac(3 * n, 6);
  std::vector<double> plus, minus;
  for (int p = 0; p < 6; ++p) {
    std::array<double, 6> xp = x0, xm = x0;
    xp[p] += kStep;
    xm[p] -= kStep;
    stacked_residuals(instance, RigidTransform::from_params(xp), plus);
    stacked_residuals(instance, RigidTransform::from_params(xm), minus);
    for (std::size_t row = 0; row < 3 * n; ++row) jac(row, p) = (plus[row] - minus[row]) / (2.0 * kStep);
  }

  std::vector<double> row_weights(3 * n);
  for (std::size_t i = 0; i < n; ++i) row_weights[3 * i] = row_weights[3 * i + 1] = row_weights[3 * i + 2] = weights[i];

  const std::vector<double> step = linalg::weighted_least_squares(jac, residuals, row_weights);
  std::array<double, 6> x1 = x0;
  for (int p = 0; p < 6; ++p) x1[p] += step[p];
  RigidTransform next = RigidTransform::from_params(x1);
  next.rotation = canonical_axis_angle(next.rotation);
  return {next, linalg::norm_inf(step)};
}

SyntheticRegistration synth_registration(int n_points, double outlier_ratio, double noise_sigma, std::uint64_t seed) {
  if (n_points < 10) throw PreconditionError("synth_registration: need at least 10 points");
  if (outlier_ratio < 0.0 || outlier_ratio > 0.99) throw PreconditionError("synth_registration: outlier ratio outside [0, 0.99]");
  SeededRng rng(seed);

  Vec3 axis{rng.normal(), rng.normal(), rng.normal()};
  const double axis_norm = std::max(norm(axis), 1e-12);
  const double angle = rng.uniform(0.0, std::numbers::pi / 2.0);
  RigidTransform gt;
  for (int k = 0; k < 3; ++k) gt.rotation[k] = axis[k] / axis_norm * angle;
  for (int k = 0; k < 3; ++k) gt.translation[k] = rng.uniform(-1.0, 1.0);

  const auto n = static_cast<std::size_t>(n_points);
  SyntheticRegistration out;
  out.ground_truth = gt;
  RegistrationInstance& inst = out.instance;
  inst.noise_sigma = noise_sigma;
  inst.c_bar = std::max(3.0 * noise_sigma, 1e-3);
  inst.source_points.resize(n);
  inst.target_points.resize(n);
  inst.inlier_mask.assign(n, true);

  Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
  for (std::size_t i = 0; i < n; ++i) {
    Vec3& p = inst.source_points[i];
    for (int k = 0; k < 3; ++k) p[k] = rng.uniform(-1.0, 1.0);
    Vec3 q = gt.apply(p);
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], q[k]);
      hi[k] = std::max(hi[k], q[k]);
    }
    if (noise_sigma > 0.0) {
      Vec3 e;
      do {
        e = {rng.normal(0.0, noise_sigma), rng.normal(0.0, noise_sigma), rng.normal(0.0, noise_sigma)};
      } while (norm(e) > 3.0 * noise_sigma);
      for (int k = 0; k < 3; ++k) q[k] += e[k];
    }
    inst.target_points[i] = q;
  }

  const auto n_out = static_cast<std::size_t>(std::lround(outlier_ratio * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::size_t i = order[j];
    inst.inlier_mask[i] = false;
    const Vec3 clean = gt.apply(inst.source_points[i]);
    Vec3& q = inst.target_points[i];
    // An outlier that lands on its true correspondence is an inlier in disguise; redraw it.
    do {
      for (int k = 0; k < 3; ++k) q[k] = rng.uniform(lo[k], hi[k]);
    } while (norm(sub(q, clean)) <= 2.0 * inst.c_bar);
  }
  return out;
}

RegistrationErrors registration_errors(const RigidTransform& estimate, const RigidTransform& ground_truth) {
  const Mat3 re = estimate.rotation_matrix();
  const Mat3 rg = ground_truth.rotation_matrix();
  // D = R_gt^T R_est; angle = atan2(|vee(D - D^T)| / 2, (tr D - 1) / 2), the
  // numerically stable form of arccos((tr D - 1) / 2).
  Mat3 d{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) d[i][j] += rg[k][i] * re[k][j];
  const double tr = d[0][0] + d[1][1] + d[2][2];
  const Vec3 axis{d[2][1] - d[1][2], d[0][2] - d[2][0], d[1][0] - d[0][1]};
  RegistrationErrors out;
  out.rotation = std::atan2(0.5 * norm(axis), 0.5 * (tr - 1.0));
  out.translation = norm(sub(estimate.translation, ground_truth.translation));
  return out;
}

std::vector<Vec3> parse_ply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next_line() || line != "ply") throw ParseError(1, "missing 'ply' magic");
  bool have_format = false;
  bool in_vertex = false;
  bool vertex_seen = false;
  std::size_t vertex_count = 0;
  std::vector<std::string> props;
  std::array<int, 3> xyz{-1, -1, -1};
  while (true) {
    if (!next_line()) throw ParseError(line_no, "unexpected end of header");
    std::istringstream words(line);
    std::string key;
    words >> key;
    if (key == "end_header") break;
    if (key == "comment" || key == "obj_info" || key.empty()) continue;
    if (key == "format") {
      std::string fmt, version;
      words >> fmt >> version;
      if (fmt == "binary_little_endian" || fmt == "binary_big_endian") {
        throw UnsupportedFormat("ply: binary format '" + fmt + "' is not supported");
      }
      if (fmt != "ascii") throw ParseError(line_no, "unknown format '" + fmt + "'");
      have_format = true;
    } else if (key == "element") {
      std::string name;
      long long count = -1;
      words >> name >> count;
      if (words.fail() || count < 0) throw ParseError(line_no, "malformed element line");
      if (vertex_seen && in_vertex) in_vertex = false;
      if (name == "vertex") {
        if (vertex_seen) throw ParseError(line_no, "duplicate vertex element");
        if (!props.empty() || vertex_seen) throw ParseError(line_no, "vertex element must come first");
        vertex_seen = in_vertex = true;
        vertex_count = static_cast<std::size_t>(count);
      } else {
        if (!vertex_seen) throw ParseError(line_no, "vertex element must come first");
        in_vertex = false;
      }
    } else if (key == "property") {
      if (!in_vertex) continue;
      std::string type, name;
      words >> type;
      if (type == "list") throw ParseError(line_no, "list properties are not supported on vertices");
      words >> name;
      if (words.fail()) throw ParseError(line_no, "malformed property line");
      const bool is_float = type == "float" || type == "float32" || type == "double" || type == "float64";
      int axis = name == "x" ? 0 : name == "y" ? 1 : name == "z" ? 2 : -1;
      if (axis >= 0) {
        if (!is_float) throw ParseError(line_no, "property '" + name + "' must be a float type, got '" + type + "'");
        xyz[axis] = static_cast<int>(props.size());
      }
      props.push_back(name);
    } else {
      throw ParseError(line_no, "unexpected header keyword '" + key + "'");
    }
  }
  if (!have_format) throw ParseError(line_no, "missing format line");
  if (!vertex_seen) throw ParseError(line_no, "missing vertex element");
  for (int k = 0; k < 3; ++k) {
    if (xyz[k] < 0) throw ParseError(line_no, std::string("missing vertex property ") + "xyz"[k]);
  }

  std::vector<Vec3> points;
  points.reserve(vertex_count);
  std::vector<double> values(props.size());
  while (points.size() < vertex_count) {
    if (!next_line()) {
      throw ParseError(line_no + 1, "expected " + std::to_string(vertex_count) + " vertices, found " +
                                        std::to_string(points.size()));
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream row(line);
    for (double& v : values) {
      if (!(row >> v)) throw ParseError(line_no, "vertex row has too few or non-numeric values");
    }
    points.push_back({values[xyz[0]], values[xyz[1]], values[xyz[2]]});
  }
  return points;
}

std::vector<Vec3> load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_ply(buffer.str());
}

GncProblem::GncProblem(RegistrationInstance instance, RigidTransform initial)
    : instance_(std::move(instance)), transform_(initial), weights_(instance_.size(), 1.0) {}

double GncProblem::homotopy_value(double u) const { return gm_homotopy_value(instance_, transform_, u); }

void GncProblem::predict(double /*from_u*/, double to_u, SeededRng& /*rng*/) {
  weights_ = update_weights(instance_, transform_, to_u);
}

double GncProblem::correct_once(double /*u*/, SeededRng& /*rng*/) {
  try {
    GaussNewtonStep step = gauss_newton_correct_once(instance_, transform_, weights_);
    transform_ = step.transform;
    return step.step_norm;
  } catch (const DegenerateSystem& e) {
    throw CorrectorFailure(e.what());
  }
}

double GncProblem::criterion(double /*u*/, SeededRng& /*rng*/) {
  try {
    return gauss_newton_correct_once(instance_, transform_, weights_).step_norm;
  } catch (const DegenerateSystem& e) {
    throw CorrectorFailure(e.what());
  }
}

double GncProblem::target_metric() const { return gm_homotopy_value(instance_, transform_, 1.0); }

std::vector<double> GncProblem::solution() const {
  const auto p = transform_.params();
  return {p.begin(), p.end()};
}

}  // namespace npc::gnc
