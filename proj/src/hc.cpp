#include "npc/hc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "npc/errors.hpp"

namespace npc::hc {

namespace {

using linalg::ComplexMatrix;
using linalg::LuFactorization;

CVector matvec(const ComplexMatrix& a, const CVector& x) { return linalg::multiply<Complex>(a, x); }

bool all_finite(const CVector& v) {
  return std::all_of(v.begin(), v.end(), [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

struct PointData {
  CVector f, g;
  ComplexMatrix jf, jg;
};

PointData evaluate_both(const Homotopy& h, const CVector& x) {
  PointData d;
  h.start->evaluate_with_jacobian(x, d.f, d.jf);
  h.target->evaluate_with_jacobian(x, d.g, d.jg);
  return d;
}

ComplexMatrix blend_jacobian(const PointData& d, Complex gamma, double t) {
  const std::size_t n = d.jf.rows();
  ComplexMatrix j(n, n);
  const Complex a = (1.0 - t) * gamma;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c) j(r, c) = a * d.jf(r, c) + t * d.jg(r, c);
  return j;
}

}  // namespace

Complex random_gamma(SeededRng& rng) { return std::polar(1.0, 2.0 * std::numbers::pi * rng.uniform()); }

HomotopyValue homotopy_eval(const Homotopy& h, const CVector& x, double t) {
  if (h.start->n_vars() != h.target->n_vars()) throw PreconditionError("homotopy: start and target sizes differ");
  const PointData d = evaluate_both(h, x);
  HomotopyValue out;
  out.value.resize(x.size());
  const Complex a = (1.0 - t) * h.gamma;
  for (std::size_t i = 0; i < x.size(); ++i) out.value[i] = a * d.f[i] + t * d.g[i];
  out.jacobian = blend_jacobian(d, h.gamma, t);
  return out;
}

TaylorData taylor_coefficients(const Homotopy& h, const CVector& x, double t) {
  const std::size_t n = x.size();
  const PointData d = evaluate_both(h, x);
  const Complex a = (1.0 - t) * h.gamma;
  const Complex gamma = h.gamma;
  const LuFactorization<Complex> lu(blend_jacobian(d, gamma, t));

  // H_x x' = -H_t, H_t = g - gamma f
  CVector rhs(n);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = -(d.g[i] - gamma * d.f[i]);
  const CVector x1 = lu.solve(rhs);

  const auto jet_f = h.start->directional_jet(x, x1);
  const auto jet_g = h.target->directional_jet(x, x1);
  const CVector jf_x1 = matvec(d.jf, x1);
  const CVector jg_x1 = matvec(d.jg, x1);

  // H_x x'' = -(H_xx[x', x'] + 2 H_xt x')
  for (std::size_t i = 0; i < n; ++i) {
    const Complex hxx = a * 2.0 * jet_f[i][2] + t * 2.0 * jet_g[i][2];
    const Complex hxt = jg_x1[i] - gamma * jf_x1[i];
    rhs[i] = -(hxx + 2.0 * hxt);
  }
  const CVector x2 = lu.solve(rhs);

  // H_x x''' = -(H_xxx[x',x',x'] + 3 H_xx[x',x''] + 3 H_xt x'' + 3 H_xxt[x',x'])
  const CVector bf = h.start->second_bilinear(x, x1, x2);
  const CVector bg = h.target->second_bilinear(x, x1, x2);
  const CVector jf_x2 = matvec(d.jf, x2);
  const CVector jg_x2 = matvec(d.jg, x2);
  for (std::size_t i = 0; i < n; ++i) {
    const Complex hxxx = a * 6.0 * jet_f[i][3] + t * 6.0 * jet_g[i][3];
    const Complex hxx12 = a * bf[i] + t * bg[i];
    const Complex hxt2 = jg_x2[i] - gamma * jf_x2[i];
    const Complex hxxt = 2.0 * jet_g[i][2] - gamma * 2.0 * jet_f[i][2];
    rhs[i] = -(hxxx + 3.0 * hxx12 + 3.0 * hxt2 + 3.0 * hxxt);
  }
  const CVector x3 = lu.solve(rhs);

  TaylorData out{x, x1, x2, x3};
  for (std::size_t i = 0; i < n; ++i) {
    out.c2[i] /= 2.0;
    out.c3[i] /= 6.0;
  }
  return out;
}

bool Prediction::any_fallback() const { return std::find(fallback.begin(), fallback.end(), true) != fallback.end(); }

CVector power_series_predict(const TaylorData& d, double dt) {
  CVector x(d.c0.size());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = d.c0[i] + dt * (d.c1[i] + dt * (d.c2[i] + dt * d.c3[i]));
  return x;
}

Prediction pade_predict(const TaylorData& d, double dt) {
  if (!(dt > 0.0)) throw PreconditionError("pade_predict: dt must be positive");
  const std::size_t n = d.c0.size();
  Prediction out{CVector(n), std::vector<bool>(n, false)};
  for (std::size_t i = 0; i < n; ++i) {
    const auto series = [&] { return d.c0[i] + dt * (d.c1[i] + dt * (d.c2[i] + dt * d.c3[i])); };
    if (std::abs(d.c2[i]) < 1e-12) {
      out.x[i] = series();
      out.fallback[i] = true;
      continue;
    }
    const Complex q1 = -d.c3[i] / d.c2[i];
    const Complex den = 1.0 + q1 * dt;
    if (std::abs(den) < 1e-8) {
      out.x[i] = series();
      out.fallback[i] = true;
      continue;
    }
    const Complex p0 = d.c0[i];
    const Complex p1 = d.c1[i] + q1 * d.c0[i];
    const Complex p2 = d.c2[i] + q1 * d.c1[i];
    out.x[i] = (p0 + dt * (p1 + dt * p2)) / den;
  }
  return out;
}

NewtonStep newton_correct_once(const Homotopy& h, const PathState& state) {
  const HomotopyValue hv = homotopy_eval(h, state.x, state.t);
  CVector rhs(hv.value.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -hv.value[i];
  const CVector dx = linalg::lu_solve<Complex>(hv.jacobian, rhs);
  NewtonStep out;
  out.state.x = state.x;
  out.state.t = state.t;
  for (std::size_t i = 0; i < dx.size(); ++i) out.state.x[i] += dx[i];
  out.step_norm = linalg::norm_inf(std::span<const Complex>(dx));
  out.state.residual = linalg::norm_inf(std::span<const Complex>(homotopy_eval(h, out.state.x, state.t).value));
  return out;
}

// ------------------------------------------------------------------ HcProblem

HcProblem::HcProblem(Homotopy h, CVector start_root, HcConfig config)
    : h_(std::move(h)), config_(config), x_(std::move(start_root)) {
  if (!h_.start || !h_.target) throw PreconditionError("HcProblem: missing system");
  if (x_.size() != h_.dimension()) throw PreconditionError("HcProblem: start root dimension mismatch");
}

double HcProblem::homotopy_value(double u) const {
  return linalg::norm_inf(std::span<const Complex>(homotopy_eval(h_, x_, u).value));
}

void HcProblem::predict(double from_u, double to_u, SeededRng& /*rng*/) {
  pending_dx_.reset();
  last_step_ = -1.0;
  predict_failed_ = false;
  try {
    const TaylorData data = taylor_coefficients(h_, x_, from_u);
    const Prediction p = pade_predict(data, to_u - from_u);
    if (p.any_fallback()) ++pade_fallbacks_;
    if (!all_finite(p.x)) {
      predict_failed_ = true;
      return;
    }
    x_ = p.x;
  } catch (const SingularMatrix&) {
    predict_failed_ = true;
  }
}

double HcProblem::pending_step(double u) {
  if (predict_failed_) throw CorrectorFailure("predictor hit a singular Jacobian");
  if (pending_dx_ && pending_u_ == u) return linalg::norm_inf(std::span<const Complex>(*pending_dx_));
  const HomotopyValue hv = homotopy_eval(h_, x_, u);
  CVector rhs(hv.value.size());
  for (std::size_t i = 0; i < rhs.size(); ++i) rhs[i] = -hv.value[i];
  CVector dx;
  try {
    dx = linalg::lu_solve<Complex>(hv.jacobian, rhs);
  } catch (const SingularMatrix&) {
    throw CorrectorFailure("singular Jacobian in Newton step");
  }
  if (!all_finite(dx)) throw CorrectorFailure("non-finite Newton step");
  if (last_step_ < 0.0 &&
      linalg::norm_inf(std::span<const Complex>(dx)) >
          config_.predictor_tolerance * (1.0 + linalg::norm_inf(std::span<const Complex>(x_))))
    throw CorrectorFailure("prediction too far from the path");
  pending_dx_ = std::move(dx);
  pending_u_ = u;
  return linalg::norm_inf(std::span<const Complex>(*pending_dx_));
}

double HcProblem::criterion(double u, SeededRng& /*rng*/) { return pending_step(u); }

double HcProblem::correct_once(double u, SeededRng& /*rng*/) {
  const double applied = pending_step(u);
  for (std::size_t i = 0; i < x_.size(); ++i) x_[i] += (*pending_dx_)[i];
  pending_dx_.reset();
  last_step_ = applied;
  if (diverged()) throw CorrectorFailure("Newton iterate left the divergence bound");
  const double next = pending_step(u);
  const double floor = 1e-12 * (1.0 + linalg::norm_inf(std::span<const Complex>(x_)));
  if (next > config_.contraction * applied && next > floor) throw CorrectorFailure("Newton iteration is not contracting");
  last_step_ = applied;
  return next;
}

double HcProblem::target_residual() const {
  return linalg::norm_inf(std::span<const Complex>(h_.target->evaluate(x_)));
}

double HcProblem::target_metric() const { return target_residual(); }

bool HcProblem::target_reached() const { return target_residual() <= config_.success_residual; }

bool HcProblem::diverged() const {
  for (const Complex& z : x_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || std::abs(z) > config_.divergence_bound) return true;
  return false;
}

void HcProblem::checkpoint() { saved_x_ = x_; }

void HcProblem::rollback() {
  x_ = saved_x_;
  pending_dx_.reset();
  predict_failed_ = false;
  last_step_ = -1.0;
}

int HcProblem::finalize(int budget, SeededRng& /*rng*/) {
  int iters = 0;
  const double scale = 1.0 + linalg::norm_inf(std::span<const Complex>(x_));
  double step = pending_step(1.0);
  const int limit = std::min(budget, config_.endgame_iters);
  while (step > config_.endgame_tolerance * scale && iters < limit) {
    for (std::size_t i = 0; i < x_.size(); ++i) x_[i] += (*pending_dx_)[i];
    pending_dx_.reset();
    ++iters;
    step = pending_step(1.0);
  }
  return iters;
}

std::vector<double> HcProblem::solution() const {
  std::vector<double> out;
  out.reserve(2 * x_.size());
  for (const Complex& z : x_) {
    out.push_back(z.real());
    out.push_back(z.imag());
  }
  return out;
}

// ------------------------------------------------------------------ drivers

TrackResult track_path(const Homotopy& h, const CVector& start_root, ScheduleController& controller,
                       const SolveLimits& limits, SeededRng& rng, HcConfig config) {
  if (start_root.size() != h.dimension()) throw PreconditionError("track_path: start root dimension mismatch");
  const double start_res = linalg::norm_inf(std::span<const Complex>(h.start->evaluate(start_root)));
  if (!(start_res <= 1e-10)) throw PreconditionError("track_path: start root does not satisfy the start system");
  HcProblem problem(h, start_root, config);
  TrackResult out;
  out.trace = solve(problem, controller, limits, rng);
  out.root = problem.x();
  out.success = out.trace.success && problem.target_reached();
  out.pade_fallbacks = problem.pade_fallbacks();
  return out;
}

SolveAllResult solve_all(const PolynomialSystem& target, const poly::StartSystem& start, Complex gamma,
                         const ControllerFactory& make_controller, const SolveLimits& limits, std::uint64_t seed,
                         double dedup_tol) {
  Homotopy h{std::make_shared<const PolynomialSystem>(start.system), std::make_shared<const PolynomialSystem>(target),
             gamma};
  SolveAllResult out;
  for (std::size_t i = 0; i < start.roots.size(); ++i) {
    SeededRng rng(SeededRng::derive(seed, i));
    auto controller = make_controller();
    TrackResult r = track_path(h, start.roots[i], *controller, limits, rng);
    if (r.success) {
      ++out.successes;
      const bool seen = std::any_of(out.distinct_roots.begin(), out.distinct_roots.end(), [&](const CVector& q) {
        double d = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k) d = std::max(d, std::abs(q[k] - r.root[k]));
        return d <= dedup_tol;
      });
      if (!seen) out.distinct_roots.push_back(r.root);
    }
    out.paths.push_back(std::move(r));
  }
  return out;
}

std::vector<CVector> sorted_roots(std::vector<CVector> roots) {
  auto key = [](const CVector& v) {
    std::vector<double> k;
    for (const Complex& z : v) {
      k.push_back(std::round(z.real() * 1e6) / 1e6);
      k.push_back(std::round(z.imag() * 1e6) / 1e6);
    }
    return k;
  };
  std::sort(roots.begin(), roots.end(), [&](const CVector& a, const CVector& b) { return key(a) < key(b); });
  return roots;
}

}  // namespace npc::hc
