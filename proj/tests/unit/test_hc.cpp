#include "doctest.h"

#include <cmath>

#include "npc/errors.hpp"
#include "npc/hc.hpp"

using namespace npc;
using namespace npc::hc;
using poly::Polynomial;
using poly::Term;

namespace {

std::shared_ptr<const PolynomialSystem> univariate(double c0, double c1, double c2) {
  return std::make_shared<const PolynomialSystem>(
      1, std::vector<Polynomial>{Polynomial{{Term{c2, {2}}, Term{c1, {1}}, Term{c0, {0}}}}});
}

double max_diff(const CVector& a, const CVector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// Newton at fixed t until the step is tiny.
CVector refine(const Homotopy& h, CVector x, double t) {
  for (int k = 0; k < 50; ++k) {
    const auto step = newton_correct_once(h, PathState{x, t, 0.0});
    x = step.state.x;
    if (step.step_norm < 1e-15) break;
  }
  return x;
}

/// Tracks x from t = 0 to `t_end` with small Newton-corrected steps.
CVector walk(const Homotopy& h, CVector x, double t_end, int steps) {
  for (int k = 1; k <= steps; ++k) x = refine(h, x, t_end * k / steps);
  return x;
}

}  // namespace

TEST_CASE("total-degree start systems") {
  const PolynomialSystem two(2, {Polynomial{{Term{1.0, {2, 0}}, Term{1.0, {0, 1}}}},
                                 Polynomial{{Term{1.0, {1, 1}}, Term{-3.0, {0, 0}}}}});
  const auto start = poly::total_degree_start(two, 0);
  REQUIRE(start.roots.size() == 4);
  for (const auto& r : start.roots) {
    CHECK(linalg::norm_inf(std::span<const Complex>(start.system.evaluate(r))) < 1e-12);
    CHECK(std::abs(std::abs(r[0].real()) - 1.0) < 1e-12);
  }
  CHECK(poly::katsura(5).bezout_number() == 32);
  CHECK(poly::cyclic(5).bezout_number() == 120);

  const auto sub = poly::total_degree_start(poly::katsura(5), 3, 10);
  CHECK(sub.roots.size() == 10);
  for (std::size_t i = 0; i < sub.roots.size(); ++i)
    for (std::size_t j = i + 1; j < sub.roots.size(); ++j) CHECK(max_diff(sub.roots[i], sub.roots[j]) > 1e-6);
  CHECK_THROWS_AS(poly::total_degree_start(poly::katsura(5), 0, 0, 16), ConfigError);
}

TEST_CASE("homotopy evaluation") {
  Homotopy h{univariate(-1.0, 0.0, 1.0), univariate(-4.0, 0.0, 1.0), {1.0, 0.0}};
  const CVector x{Complex(1.0, 0.0)};
  CHECK(std::abs(homotopy_eval(h, x, 0.5).value[0] - Complex(-1.5, 0.0)) < 1e-15);

  const CVector y{Complex(0.3, -0.7)};
  const auto at0 = homotopy_eval(h, y, 0.0);
  CHECK(std::abs(at0.value[0] - h.start->evaluate(y)[0]) < 1e-15);
  CHECK(std::abs(at0.jacobian(0, 0) - h.start->jacobian(y)(0, 0)) < 1e-15);
  h.gamma = std::polar(1.0, 2.1);
  const auto at1 = homotopy_eval(h, y, 1.0);
  CHECK(std::abs(at1.value[0] - h.target->evaluate(y)[0]) < 1e-15);
  CHECK(std::abs(at1.jacobian(0, 0) - h.target->jacobian(y)(0, 0)) < 1e-15);
}

TEST_CASE("Taylor coefficients") {
  SUBCASE("straight path") {
    Homotopy h{univariate(-1.0, 1.0, 0.0), univariate(-2.0, 1.0, 0.0), {1.0, 0.0}};
    const auto d = taylor_coefficients(h, {Complex(1.3, 0.0)}, 0.3);
    CHECK(std::abs(d.c1[0] - 1.0) < 1e-14);
    CHECK(std::abs(d.c2[0]) < 1e-14);
    CHECK(std::abs(d.c3[0]) < 1e-14);
  }
  SUBCASE("square-root path") {
    // x(t) = sqrt(1 + 3t): x' = 3/2, x''/2 = -9/8, x'''/6 = 27/16 at t = 0.
    Homotopy h{univariate(-1.0, 0.0, 1.0), univariate(-4.0, 0.0, 1.0), {1.0, 0.0}};
    const auto d = taylor_coefficients(h, {Complex(1.0, 0.0)}, 0.0);
    CHECK(std::abs(d.c1[0] - 1.5) < 1e-14);
    CHECK(std::abs(d.c2[0] + 9.0 / 8.0) < 1e-14);
    CHECK(std::abs(d.c3[0] - 27.0 / 16.0) < 1e-13);
  }
  SUBCASE("one factorization per call") {
    const auto target = poly::katsura(3);
    const auto start = poly::total_degree_start(target, 0);
    SeededRng rng(1);
    Homotopy h{std::make_shared<const PolynomialSystem>(start.system),
               std::make_shared<const PolynomialSystem>(target), random_gamma(rng)};
    const std::size_t before = linalg::factorization_count();
    taylor_coefficients(h, start.roots[0], 0.0);
    CHECK(linalg::factorization_count() == before + 1);
  }
}

TEST_CASE("Taylor data agrees with finite differences along a katsura(3) path") {
  const auto target = poly::katsura(3);
  const auto start = poly::total_degree_start(target, 0);
  SeededRng rng(21);
  Homotopy h{std::make_shared<const PolynomialSystem>(start.system), std::make_shared<const PolynomialSystem>(target),
             random_gamma(rng)};
  for (std::size_t path = 0; path < start.roots.size(); ++path) {
    const double t0 = 0.4;
    const CVector x0 = walk(h, start.roots[path], t0, 400);
    const double step = 1e-5;
    const CVector xp = refine(h, x0, t0 + step);
    const CVector xm = refine(h, x0, t0 - step);
    const auto d = taylor_coefficients(h, x0, t0);
    CVector fd(x0.size());
    for (std::size_t i = 0; i < x0.size(); ++i) fd[i] = (xp[i] - xm[i]) / (2.0 * step);
    const double scale = linalg::norm_inf(std::span<const Complex>(d.c1));
    CHECK(max_diff(fd, d.c1) <= 1e-4 * scale);

    // Second and third coefficients against wider stencils.
    const double s2 = 2e-4;
    const CVector a = refine(h, x0, t0 + s2), b = refine(h, x0, t0 - s2);
    const CVector a2 = refine(h, x0, t0 + 2 * s2), b2 = refine(h, x0, t0 - 2 * s2);
    for (std::size_t i = 0; i < x0.size(); ++i) {
      const Complex second = (a[i] - 2.0 * x0[i] + b[i]) / (s2 * s2) / 2.0;
      const Complex third = (a2[i] - 2.0 * a[i] + 2.0 * b[i] - b2[i]) / (2.0 * s2 * s2 * s2) / 6.0;
      CHECK(std::abs(second - d.c2[i]) <= 1e-3 * (1.0 + std::abs(d.c2[i])));
      CHECK(std::abs(third - d.c3[i]) <= 2e-2 * (1.0 + std::abs(d.c3[i])));
    }
  }
}

TEST_CASE("Pade predictor") {
  SUBCASE("vanishing third coefficient is a quadratic Taylor step") {
    TaylorData d{{Complex(1.0)}, {Complex(2.0)}, {Complex(0.5)}, {Complex(0.0)}};
    const auto p = pade_predict(d, 0.3);
    CHECK(std::abs(p.x[0] - Complex(1.0 + 0.6 + 0.045)) < 1e-15);
    CHECK_FALSE(p.any_fallback());
  }
  SUBCASE("geometric series is reproduced exactly") {
    TaylorData d{{Complex(1.0)}, {Complex(-1.0)}, {Complex(1.0)}, {Complex(-1.0)}};
    for (double dt : {0.01, 0.2, 0.7, 3.0, 50.0}) {
      const auto p = pade_predict(d, dt);
      CHECK(std::abs(p.x[0] - 1.0 / (1.0 + dt)) <= 1e-12);
    }
    const double pade_err = std::abs(pade_predict(d, 0.2).x[0] - 1.0 / 1.2);
    const double series_err = std::abs(power_series_predict(d, 0.2)[0] - 1.0 / 1.2);
    CHECK(pade_err < series_err);
  }
  SUBCASE("tiny second coefficient falls back to the power series") {
    TaylorData d{{Complex(1.0), Complex(1.0)}, {Complex(1.0), Complex(-1.0)}, {Complex(1e-14), Complex(1.0)},
                 {Complex(0.3), Complex(-1.0)}};
    const auto p = pade_predict(d, 0.1);
    CHECK(p.fallback[0]);
    CHECK_FALSE(p.fallback[1]);
    CHECK(std::abs(p.x[0] - power_series_predict(d, 0.1)[0]) < 1e-15);
  }
  SUBCASE("pole at the step falls back") {
    TaylorData d{{Complex(1.0)}, {Complex(-1.0)}, {Complex(1.0)}, {Complex(-1.0)}};
    const auto p = pade_predict(d, 1.0);  // q1 = 1, denominator 2: fine
    CHECK_FALSE(p.any_fallback());
    TaylorData e{{Complex(1.0)}, {Complex(1.0)}, {Complex(1.0)}, {Complex(1.0)}};
    CHECK(pade_predict(e, 1.0).fallback[0]);  // q1 = -1, denominator 0
  }
}

TEST_CASE("Newton corrector") {
  Homotopy h{univariate(-1.0, 0.0, 1.0), univariate(-4.0, 0.0, 1.0), {1.0, 0.0}};
  const auto at_root = newton_correct_once(h, PathState{{Complex(2.0)}, 1.0, 0.0});
  CHECK(at_root.step_norm < 1e-15);
  const auto from3 = newton_correct_once(h, PathState{{Complex(3.0)}, 1.0, 0.0});
  CHECK(std::abs(from3.state.x[0] - 13.0 / 6.0) < 1e-15);

  // ||dx_{k+1}|| <= C ||dx_k||^2 with C = 1 / (2 * root) near the root.
  PathState s{{Complex(3.0)}, 1.0, 0.0};
  std::vector<double> steps;
  for (int k = 0; k < 5; ++k) {
    const auto n = newton_correct_once(h, s);
    steps.push_back(n.step_norm);
    s = n.state;
  }
  for (std::size_t k = 1; k + 1 < steps.size() && steps[k] > 1e-12; ++k)
    CHECK(steps[k + 1] <= 0.3 * steps[k] * steps[k]);
}

TEST_CASE("tracking a single path") {
  Homotopy h{univariate(-1.0, 0.0, 1.0), univariate(-4.0, 0.0, 1.0), {1.0, 0.0}};
  auto c = classic_controller(ProblemKind::kHc);
  SeededRng rng(0);
  const auto r = track_path(h, {Complex(1.0)}, *c, default_limits(ProblemKind::kHc), rng);
  CHECK(r.success);
  CHECK(std::abs(r.root[0] - 2.0) < 1e-8);
  CHECK_THROWS_AS(track_path(h, {Complex(1.5)}, *c, default_limits(ProblemKind::kHc), rng), PreconditionError);
}

TEST_CASE("benchmark systems") {
  const auto k = poly::katsura(4);
  CHECK(k.n_vars() == 5);
  CHECK(k.degrees()[0] == 1);
  for (std::size_t i = 1; i < k.size(); ++i) CHECK(k.degrees()[i] == 2);

  const auto cy = poly::cyclic(4);
  const auto& last = cy.equations().back();
  REQUIRE(last.terms.size() == 2);
  CHECK(last.terms[0].exps == std::vector<int>{1, 1, 1, 1});
  CHECK(last.terms[1].coeff == Complex(-1.0));

  const auto nn = poly::noon(3);
  for (const Complex& v : nn.evaluate(CVector(3, Complex(1.0)))) CHECK(std::abs(v - 1.9) < 1e-14);

  const auto ch = poly::chandra(4);
  CHECK(ch.n_vars() == 4);
  CHECK(ch.bezout_number() == 16);

  CHECK_THROWS_AS(poly::benchmark_system("katsura", 11), ConfigError);
  CHECK_THROWS_AS(poly::benchmark_system("eco", 3), ConfigError);
}

TEST_CASE("text format round trip and errors") {
  const auto sys = poly::katsura(3);
  const auto back = poly::parse_system(poly::format_system(sys));
  SeededRng rng(2);
  CVector x(4);
  for (auto& v : x) v = Complex(rng.normal(), rng.normal());
  CHECK(max_diff(sys.evaluate(x), back.evaluate(x)) < 1e-14);

  const auto merged = poly::parse_system("(1,0) x1^2 + (2,0) x1^2 + (-1,0)\n");
  REQUIRE(merged.equations()[0].terms.size() == 2);
  CHECK(merged.equations()[0].terms[0].coeff == Complex(3.0));

  const auto with_comment = poly::parse_system("# two equations\n(1,0) x1 x2 + (-1,0)\n\n(1,0.5) x2^3 + (0,-2) x1\n");
  CHECK(with_comment.n_vars() == 2);

  try {
    poly::parse_system("(1,0) x1 + (1,0)\n(1,0 x2\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
  try {
    poly::parse_system("(1,0) x3\n(1,0) x1\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }
}

TEST_CASE("katsura(5): every path reaches a distinct certified root") {
  const auto target = poly::katsura(5);
  const auto start = poly::total_degree_start(target, 0);
  for (std::uint64_t gamma_seed = 1; gamma_seed <= 8; ++gamma_seed) {
    SeededRng g(gamma_seed);
    const Complex gamma = random_gamma(g);
    const auto res = solve_all(target, start, gamma, [] { return classic_controller(ProblemKind::kHc); },
                               default_limits(ProblemKind::kHc), 99);
    CHECK(res.successes == 32);
    CHECK(res.distinct_roots.size() == 32);
    Homotopy h{std::make_shared<const PolynomialSystem>(start.system),
               std::make_shared<const PolynomialSystem>(target), gamma};
    for (const auto& p : res.paths) {
      if (!p.success) continue;
      CHECK(linalg::norm_inf(std::span<const Complex>(target.evaluate(p.root))) <= 1e-8);
      CHECK(newton_correct_once(h, PathState{p.root, 1.0, 0.0}).step_norm <= 1e-8);
    }
  }
}

TEST_CASE("cyclic(5) has 70 finite roots; the other paths diverge") {
  const auto target = poly::cyclic(5);
  const auto start = poly::total_degree_start(target, 0);
  SeededRng g(1);
  const auto res = solve_all(target, start, random_gamma(g), [] { return classic_controller(ProblemKind::kHc); },
                             default_limits(ProblemKind::kHc), 7);
  CHECK(res.successes == 70);
  CHECK(res.distinct_roots.size() == 70);
}

TEST_CASE("gamma invariance on katsura(4)") {
  const auto target = poly::katsura(4);
  const auto start = poly::total_degree_start(target, 0);
  auto run = [&](std::uint64_t seed) {
    SeededRng g(seed);
    return solve_all(target, start, random_gamma(g), [] { return classic_controller(ProblemKind::kHc); },
                     default_limits(ProblemKind::kHc), seed);
  };
  const auto a = run(1);
  const auto b = run(2);
  REQUIRE(a.distinct_roots.size() == b.distinct_roots.size());
  const auto sa = sorted_roots(a.distinct_roots);
  const auto sb = sorted_roots(b.distinct_roots);
  for (const auto& r : sa) {
    double best = 1e300;
    for (const auto& q : sb) best = std::min(best, max_diff(r, q));
    CHECK(best <= 1e-6);
  }
}
