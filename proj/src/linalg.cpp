#include "npc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "npc/errors.hpp"

namespace npc::linalg {

namespace {

thread_local std::size_t g_factorizations = 0;

}  // namespace

std::size_t factorization_count() { return g_factorizations; }

template <typename T>
LuFactorization<T>::LuFactorization(Matrix<T> a) : lu_(std::move(a)), perm_(lu_.rows()) {
  if (lu_.rows() != lu_.cols()) throw PreconditionError("lu: matrix is not square");
  ++g_factorizations;
  const std::size_t n = lu_.rows();
  std::iota(perm_.begin(), perm_.end(), std::size_t{0});
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    double best = std::abs(lu_(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double mag = std::abs(lu_(i, k));
      if (mag > best) {
        best = mag;
        p = i;
      }
    }
    if (!(best >= kPivotThreshold)) throw SingularMatrix("lu: pivot below threshold in column " + std::to_string(k));
    if (p != k) {
      std::swap_ranges(lu_.row(p).begin(), lu_.row(p).end(), lu_.row(k).begin());
      std::swap(perm_[p], perm_[k]);
    }
    const T pivot = lu_(k, k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const T factor = lu_(i, k) / pivot;
      lu_(i, k) = factor;
      if (factor == T{}) continue;
      for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= factor * lu_(k, j);
    }
  }
}

template <typename T>
std::vector<T> LuFactorization<T>::solve(std::span<const T> b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw PreconditionError("lu: right-hand side has wrong length");
  std::vector<T> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i) {
    T acc = x[i];
    for (std::size_t j = 0; j < i; ++j) acc -= lu_(i, j) * x[j];
    x[i] = acc;
  }
  for (std::size_t i = n; i-- > 0;) {
    T acc = x[i];
    for (std::size_t j = i + 1; j < n; ++j) acc -= lu_(i, j) * x[j];
    x[i] = acc / lu_(i, i);
  }
  return x;
}

template <typename T>
std::vector<T> multiply(const Matrix<T>& a, std::span<const T> x) {
  if (x.size() != a.cols()) throw PreconditionError("multiply: dimension mismatch");
  std::vector<T> y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    T acc{};
    const auto r = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) acc += r[j] * x[j];
    y[i] = acc;
  }
  return y;
}

template class LuFactorization<double>;
template class LuFactorization<Complex>;
template std::vector<double> multiply(const Matrix<double>&, std::span<const double>);
template std::vector<Complex> multiply(const Matrix<Complex>&, std::span<const Complex>);

std::vector<double> weighted_least_squares(const RealMatrix& jacobian, std::span<const double> residuals,
                                           std::span<const double> weights, double damping) {
  const std::size_t m = jacobian.rows();
  const std::size_t n = jacobian.cols();
  if (residuals.size() != m || weights.size() != m) throw PreconditionError("weighted_least_squares: length mismatch");

  RealMatrix normal(n, n);
  std::vector<double> rhs(n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double w = weights[i];
    if (w == 0.0) continue;
    const auto ji = jacobian.row(i);
    for (std::size_t a = 0; a < n; ++a) {
      const double wja = w * ji[a];
      rhs[a] -= wja * residuals[i];
      for (std::size_t b = a; b < n; ++b) normal(a, b) += wja * ji[b];
    }
  }
  for (std::size_t a = 0; a < n; ++a) {
    normal(a, a) += damping;
    for (std::size_t b = 0; b < a; ++b) normal(a, b) = normal(b, a);
  }
  try {
    return lu_solve<double>(normal, rhs);
  } catch (const SingularMatrix& e) {
    throw DegenerateSystem(std::string("weighted_least_squares: ") + e.what());
  }
}

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

double norm2(std::span<const Complex> v) {
  double acc = 0.0;
  for (const Complex& x : v) acc += std::norm(x);
  return std::sqrt(acc);
}

double norm_inf(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double norm_inf(std::span<const Complex> v) {
  double m = 0.0;
  for (const Complex& x : v) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> v, std::span<const double> w) {
  if (v.size() != w.size()) throw PreconditionError("dot: length mismatch");
  return std::inner_product(v.begin(), v.end(), w.begin(), 0.0);
}

Complex dot(std::span<const Complex> v, std::span<const Complex> w) {
  if (v.size() != w.size()) throw PreconditionError("dot: length mismatch");
  Complex acc{};
  for (std::size_t i = 0; i < v.size(); ++i) acc += std::conj(v[i]) * w[i];
  return acc;
}

}  // namespace npc::linalg
