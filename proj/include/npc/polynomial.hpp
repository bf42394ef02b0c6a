#pragma once

// Sparse complex polynomial systems: evaluation, Jacobians, truncated
// directional jets, a plain-text format, and the benchmark generators.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "npc/linalg.hpp"

namespace npc::poly {

using linalg::Complex;
using CVector = std::vector<Complex>;

struct Term {
  Complex coeff;
  std::vector<int> exps;
};

struct Polynomial {
  std::vector<Term> terms;

  int degree() const;
};

/// Square system: equations.size() == n_vars.
class PolynomialSystem {
 public:
  PolynomialSystem() = default;
  PolynomialSystem(int n_vars, std::vector<Polynomial> equations);

  int n_vars() const { return n_vars_; }
  std::size_t size() const { return equations_.size(); }
  const std::vector<Polynomial>& equations() const { return equations_; }
  std::vector<int> degrees() const;
  /// Product of the equation degrees.
  std::uint64_t bezout_number() const;

  CVector evaluate(const CVector& x) const;
  linalg::ComplexMatrix jacobian(const CVector& x) const;
  /// Value and Jacobian in one pass.
  void evaluate_with_jacobian(const CVector& x, CVector& value, linalg::ComplexMatrix& jac) const;

  /// Taylor coefficients of s -> p_i(x + s v) up to s^3, per equation.
  /// Entry k equals D^k p_i[v, ..., v] / k!.
  std::vector<std::array<Complex, 4>> directional_jet(const CVector& x, const CVector& v) const;
  /// D^2 p[v, v] per equation.
  CVector second_directional(const CVector& x, const CVector& v) const;
  /// D^2 p[a, b] per equation, by polarization.
  CVector second_bilinear(const CVector& x, const CVector& a, const CVector& b) const;
  /// D^3 p[v, v, v] per equation.
  CVector third_directional(const CVector& x, const CVector& v) const;

  /// Coefficients multiplied by per-equation, per-term factors produced by a callback.
  template <typename F>
  PolynomialSystem transform_coefficients(F&& f) const {
    PolynomialSystem out = *this;
    for (std::size_t i = 0; i < out.equations_.size(); ++i)
      for (std::size_t t = 0; t < out.equations_[i].terms.size(); ++t)
        out.equations_[i].terms[t].coeff = f(i, t, out.equations_[i].terms[t].coeff);
    return out;
  }

 private:
  void canonicalize();

  int n_vars_ = 0;
  std::vector<Polynomial> equations_;
  std::vector<int> max_exp_;
};

/// One equation per line; monomials `(<re>,<im>) x1^a1 ... xn^an` joined by
/// `+`. Variables are 1-indexed; `^1` may be omitted. Blank lines and lines
/// starting with `#` are skipped. Throws ParseError with the line number.
PolynomialSystem parse_system(const std::string& text);
std::string format_system(const PolynomialSystem& system);

/// Configuration error for unknown names or unsupported sizes.
PolynomialSystem benchmark_system(const std::string& name, int n);
PolynomialSystem katsura(int n);
PolynomialSystem cyclic(int n);
PolynomialSystem noon(int n, double c = 1.1);
PolynomialSystem chandra(int n, double c = 0.51234);

struct StartSystem {
  PolynomialSystem system;
  std::vector<CVector> roots;
};

/// x_i^{d_i} - 1 with all prod d_i roots-of-unity combinations. With
/// max_roots > 0 and a larger Bezout count, a seeded random subset of that
/// size is returned; with max_roots == 0 a Bezout count above `cap` throws.
StartSystem total_degree_start(const PolynomialSystem& target, std::uint64_t seed, std::size_t max_roots = 0,
                               std::uint64_t cap = 100000);

}  // namespace npc::poly
