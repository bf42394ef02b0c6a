#include "doctest.h"

#include <cmath>
#include <vector>

#include "npc/errors.hpp"
#include "npc/linalg.hpp"
#include "npc/rng.hpp"

using namespace npc;
using namespace npc::linalg;

namespace {

RealMatrix random_real(std::size_t r, std::size_t c, SeededRng& rng) {
  RealMatrix m(r, c);
  for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
  return m;
}

ComplexMatrix random_complex(std::size_t n, SeededRng& rng) {
  ComplexMatrix m(n, n);
  for (Complex& v : m.data()) v = Complex(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
  return m;
}

}  // namespace

TEST_CASE("lu_solve on identity and diagonal") {
  const RealMatrix eye = RealMatrix::identity(3);
  const std::vector<double> b{1.5, -2.0, 7.0};
  CHECK(lu_solve<double>(eye, b) == b);

  RealMatrix d(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 4.0;
  const std::vector<double> rhs{2.0, 8.0};
  const auto x = lu_solve<double>(d, rhs);
  CHECK(x[0] == doctest::Approx(1.0));
  CHECK(x[1] == doctest::Approx(2.0));
}

TEST_CASE("lu_solve recovers a known complex solution") {
  SeededRng rng(11);
  const ComplexMatrix a = random_complex(5, rng);
  std::vector<Complex> x(5);
  for (Complex& v : x) v = Complex(rng.normal(), rng.normal());
  const auto b = multiply<Complex>(a, x);
  const auto y = lu_solve<Complex>(a, b);
  for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(y[i] - x[i]) < 1e-10);
}

TEST_CASE("lu_solve residual bound and round trip over random matrices") {
  SeededRng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + rng.below(8);
    RealMatrix a = random_real(n, n, rng);
    for (std::size_t i = 0; i < n; ++i) a(i, i) += 3.0;  // keep the condition number moderate
    std::vector<double> x(n);
    for (double& v : x) v = rng.normal();
    const auto b = multiply<double>(a, x);
    const auto y = lu_solve<double>(a, b);
    const auto ay = multiply<double>(a, y);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) res = std::max(res, std::abs(ay[i] - b[i]));
    CHECK(res <= 1e-10 * (1.0 + norm_inf(std::span<const double>(b))));
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y[i] - x[i]) <= 1e-9 * (1.0 + std::abs(x[i])));
  }
}

TEST_CASE("singular matrix is reported") {
  RealMatrix a(2, 2);
  a(0, 0) = 1.0;
  a(0, 1) = 2.0;
  a(1, 0) = 2.0;
  a(1, 1) = 4.0;
  const std::vector<double> b{1.0, 1.0};
  CHECK_THROWS_AS(lu_solve<double>(a, b), SingularMatrix);
}

TEST_CASE("factorization counter") {
  const std::size_t before = factorization_count();
  const LuFactorization<double> lu(RealMatrix::identity(4));
  const std::vector<double> b{1, 2, 3, 4};
  lu.solve(b);
  lu.solve(b);
  CHECK(factorization_count() == before + 1);
}

TEST_CASE("weighted least squares basics") {
  const RealMatrix eye = RealMatrix::identity(2);
  const std::vector<double> r{1.0, -2.0};
  const std::vector<double> w{1.0, 1.0};
  const auto step = weighted_least_squares(eye, r, w);
  CHECK(step[0] == doctest::Approx(-1.0).epsilon(1e-8));
  CHECK(step[1] == doctest::Approx(2.0).epsilon(1e-8));

  SeededRng rng(5);
  const RealMatrix j = random_real(6, 3, rng);
  const std::vector<double> r6{1, 2, 3, 4, 5, 6};
  const std::vector<double> zero(6, 0.0);
  for (double s : weighted_least_squares(j, r6, zero)) CHECK(s == 0.0);
}

TEST_CASE("weighted least squares with unit weights equals the plain normal equations") {
  SeededRng rng(17);
  const RealMatrix j = random_real(8, 3, rng);
  std::vector<double> r(8);
  for (double& v : r) v = rng.normal();
  const std::vector<double> ones(8, 1.0);
  const auto step = weighted_least_squares(j, r, ones, 0.0);

  RealMatrix jtj(3, 3);
  std::vector<double> jtr(3, 0.0);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t a = 0; a < 3; ++a) {
      jtr[a] -= j(i, a) * r[i];
      for (std::size_t b = 0; b < 3; ++b) jtj(a, b) += j(i, a) * j(i, b);
    }
  const auto ref = lu_solve<double>(jtj, jtr);
  for (std::size_t a = 0; a < 3; ++a) CHECK(step[a] == doctest::Approx(ref[a]).epsilon(1e-10));
}

TEST_CASE("weighted least squares matches a grid search on a 4x2 problem") {
  RealMatrix j(4, 2);
  const double jv[4][2] = {{1.0, 0.5}, {-0.3, 2.0}, {0.7, -1.1}, {1.5, 0.2}};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 2; ++k) j(i, k) = jv[i][k];
  const std::vector<double> r{0.4, -1.2, 0.9, 0.1};
  const std::vector<double> w{1.0, 0.5, 2.0, 0.25};
  const auto step = weighted_least_squares(j, r, w);

  auto cost = [&](double a, double b) {
    double c = 0.0;
    for (int i = 0; i < 4; ++i) {
      const double e = r[i] + jv[i][0] * a + jv[i][1] * b;
      c += w[i] * e * e;
    }
    return c;
  };
  // Coarse grid, then successive refinement around the best cell.
  double ca = 0.0, cb = 0.0, span = 4.0;
  for (int level = 0; level < 12; ++level) {
    double best = cost(ca, cb), ba = ca, bb = cb;
    for (int p = -20; p <= 20; ++p)
      for (int q = -20; q <= 20; ++q) {
        const double a = ca + span * p / 20.0, b = cb + span * q / 20.0;
        const double c = cost(a, b);
        if (c < best) best = c, ba = a, bb = b;
      }
    ca = ba;
    cb = bb;
    span /= 8.0;
  }
  CHECK(std::abs(step[0] - ca) < 1e-6);
  CHECK(std::abs(step[1] - cb) < 1e-6);
}

TEST_CASE("norms and dots") {
  const std::vector<double> v{3.0, 4.0};
  CHECK(norm2(std::span<const double>(v)) == doctest::Approx(5.0));
  const std::vector<double> w{-7.0, 2.0};
  CHECK(norm_inf(std::span<const double>(w)) == 7.0);
  const std::vector<Complex> i1{Complex(0.0, 1.0)};
  const Complex d = dot(std::span<const Complex>(i1), std::span<const Complex>(i1));
  CHECK(d.real() == doctest::Approx(1.0));
  CHECK(d.imag() == doctest::Approx(0.0));
}
