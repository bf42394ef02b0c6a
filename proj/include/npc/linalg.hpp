#pragma once

// Minimal dense linear algebra over real and complex scalars. Everything the
// homotopy backends need: LU with partial pivoting, damped weighted least
// squares via the normal equations, and a handful of norms.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace npc::linalg {

using Complex = std::complex<double>;

/// Row-major dense matrix.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<const T> data() const { return data_; }
  std::span<T> data() { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using RealMatrix = Matrix<double>;
using ComplexMatrix = Matrix<Complex>;

/// Pivots smaller than this in magnitude make a matrix singular.
inline constexpr double kPivotThreshold = 1e-14;

/// LU factorization with partial pivoting. Factor once, solve many times.
template <typename T>
class LuFactorization {
 public:
  /// Throws SingularMatrix when a pivot falls below kPivotThreshold.
  explicit LuFactorization(Matrix<T> a);

  std::vector<T> solve(std::span<const T> b) const;
  std::size_t size() const { return lu_.rows(); }

 private:
  Matrix<T> lu_;
  std::vector<std::size_t> perm_;
};

template <typename T>
std::vector<T> lu_solve(const Matrix<T>& a, std::span<const T> b) {
  return LuFactorization<T>(a).solve(b);
}

/// Number of LU factorizations performed on the calling thread. Lets tests
/// verify that several solves share one factorization.
std::size_t factorization_count();

template <typename T>
std::vector<T> multiply(const Matrix<T>& a, std::span<const T> x);

/// Gauss-Newton step minimizing sum_i w_i (r_i + J_i . step)^2, solved through
/// the normal equations with `damping` added to the diagonal. Throws
/// DegenerateSystem when the damped normal matrix is singular.
std::vector<double> weighted_least_squares(const RealMatrix& jacobian, std::span<const double> residuals,
                                           std::span<const double> weights, double damping = 1e-9);

double norm2(std::span<const double> v);
double norm2(std::span<const Complex> v);
double norm_inf(std::span<const double> v);
double norm_inf(std::span<const Complex> v);
double dot(std::span<const double> v, std::span<const double> w);
/// Conjugate-linear in the first argument.
Complex dot(std::span<const Complex> v, std::span<const Complex> w);

}  // namespace npc::linalg
