#include "npc/polynomial.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "npc/errors.hpp"
#include "npc/rng.hpp"

namespace npc::poly {

namespace {

using Jet = std::array<Complex, 4>;

Jet jet_mul(const Jet& a, const Jet& b) {
  Jet c{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; i + j < 4; ++j) c[i + j] += a[i] * b[j];
  return c;
}

Polynomial make_poly(std::vector<Term> terms) { return Polynomial{std::move(terms)}; }

std::vector<int> unit_exps(int n) { return std::vector<int>(static_cast<std::size_t>(n), 0); }

}  // namespace

int Polynomial::degree() const {
  int d = 0;
  for (const Term& t : terms) {
    int s = 0;
    for (int e : t.exps) s += e;
    d = std::max(d, s);
  }
  return d;
}

PolynomialSystem::PolynomialSystem(int n_vars, std::vector<Polynomial> equations)
    : n_vars_(n_vars), equations_(std::move(equations)) {
  if (n_vars < 1) throw PreconditionError("polynomial system needs at least one variable");
  if (static_cast<int>(equations_.size()) != n_vars) throw PreconditionError("polynomial system must be square");
  for (const Polynomial& p : equations_)
    for (const Term& t : p.terms) {
      if (static_cast<int>(t.exps.size()) != n_vars) throw PreconditionError("exponent vector length mismatch");
      for (int e : t.exps)
        if (e < 0) throw PreconditionError("negative exponent");
    }
  canonicalize();
}

void PolynomialSystem::canonicalize() {
  for (Polynomial& p : equations_) {
    std::map<std::vector<int>, Complex> merged;
    for (const Term& t : p.terms) merged[t.exps] += t.coeff;
    p.terms.clear();
    // Descending order puts high-degree terms first, which reads naturally.
    for (auto it = merged.rbegin(); it != merged.rend(); ++it)
      if (it->second != Complex(0.0, 0.0)) p.terms.push_back({it->second, it->first});
  }
  max_exp_.assign(static_cast<std::size_t>(n_vars_), 0);
  for (const Polynomial& p : equations_)
    for (const Term& t : p.terms)
      for (int j = 0; j < n_vars_; ++j) max_exp_[j] = std::max(max_exp_[j], t.exps[j]);
}

std::vector<int> PolynomialSystem::degrees() const {
  std::vector<int> d;
  d.reserve(equations_.size());
  for (const Polynomial& p : equations_) d.push_back(p.degree());
  return d;
}

std::uint64_t PolynomialSystem::bezout_number() const {
  std::uint64_t b = 1;
  for (int d : degrees()) b *= static_cast<std::uint64_t>(std::max(d, 0));
  return b;
}

void PolynomialSystem::evaluate_with_jacobian(const CVector& x, CVector& value, linalg::ComplexMatrix& jac) const {
  const auto n = static_cast<std::size_t>(n_vars_);
  if (x.size() != n) throw PreconditionError("evaluate: dimension mismatch");
  std::vector<std::vector<Complex>> pw(n);
  for (std::size_t j = 0; j < n; ++j) {
    pw[j].assign(static_cast<std::size_t>(max_exp_[j]) + 1, Complex(1.0, 0.0));
    for (int k = 1; k <= max_exp_[j]; ++k) pw[j][k] = pw[j][k - 1] * x[j];
  }
  value.assign(n, Complex(0.0, 0.0));
  jac = linalg::ComplexMatrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Term& t : equations_[i].terms) {
      Complex mono = t.coeff;
      for (std::size_t j = 0; j < n; ++j) mono *= pw[j][t.exps[j]];
      value[i] += mono;
      for (std::size_t j = 0; j < n; ++j) {
        if (t.exps[j] == 0) continue;
        Complex d = t.coeff * static_cast<double>(t.exps[j]) * pw[j][t.exps[j] - 1];
        for (std::size_t l = 0; l < n; ++l)
          if (l != j) d *= pw[l][t.exps[l]];
        jac(i, j) += d;
      }
    }
  }
}

CVector PolynomialSystem::evaluate(const CVector& x) const {
  CVector v;
  linalg::ComplexMatrix j;
  evaluate_with_jacobian(x, v, j);
  return v;
}

linalg::ComplexMatrix PolynomialSystem::jacobian(const CVector& x) const {
  CVector v;
  linalg::ComplexMatrix j;
  evaluate_with_jacobian(x, v, j);
  return j;
}

std::vector<Jet> PolynomialSystem::directional_jet(const CVector& x, const CVector& v) const {
  const auto n = static_cast<std::size_t>(n_vars_);
  if (x.size() != n || v.size() != n) throw PreconditionError("directional_jet: dimension mismatch");
  std::vector<std::vector<Jet>> pw(n);
  for (std::size_t j = 0; j < n; ++j) {
    const Jet base{x[j], v[j], Complex(0.0, 0.0), Complex(0.0, 0.0)};
    pw[j].assign(static_cast<std::size_t>(max_exp_[j]) + 1, Jet{Complex(1.0, 0.0), {}, {}, {}});
    for (int k = 1; k <= max_exp_[j]; ++k) pw[j][k] = jet_mul(pw[j][k - 1], base);
  }
  std::vector<Jet> out(n, Jet{});
  for (std::size_t i = 0; i < n; ++i) {
    for (const Term& t : equations_[i].terms) {
      Jet mono{t.coeff, {}, {}, {}};
      for (std::size_t j = 0; j < n; ++j)
        if (t.exps[j] > 0) mono = jet_mul(mono, pw[j][t.exps[j]]);
      for (int k = 0; k < 4; ++k) out[i][k] += mono[k];
    }
  }
  return out;
}

CVector PolynomialSystem::second_directional(const CVector& x, const CVector& v) const {
  const auto jet = directional_jet(x, v);
  CVector out(jet.size());
  for (std::size_t i = 0; i < jet.size(); ++i) out[i] = 2.0 * jet[i][2];
  return out;
}

CVector PolynomialSystem::second_bilinear(const CVector& x, const CVector& a, const CVector& b) const {
  CVector plus(a.size()), minus(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) {
    plus[j] = a[j] + b[j];
    minus[j] = a[j] - b[j];
  }
  const CVector p = second_directional(x, plus);
  const CVector m = second_directional(x, minus);
  CVector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = 0.25 * (p[i] - m[i]);
  return out;
}

CVector PolynomialSystem::third_directional(const CVector& x, const CVector& v) const {
  const auto jet = directional_jet(x, v);
  CVector out(jet.size());
  for (std::size_t i = 0; i < jet.size(); ++i) out[i] = 6.0 * jet[i][3];
  return out;
}

// ---------------------------------------------------------------- text format

namespace {

class LineParser {
 public:
  LineParser(const std::string& s, std::size_t line) : s_(s), line_(line) {}

  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool done() {
    skip_ws();
    return pos_ >= s_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  double number() {
    skip_ws();
    std::size_t end = pos_;
    while (end < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                               s_[end] == 'e' || s_[end] == 'E' || s_[end] == '-' || s_[end] == '+'))
      ++end;
    if (end == pos_) fail("expected a number");
    const std::string tok = s_.substr(pos_, end - pos_);
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      fail("malformed number '" + tok + "'");
    }
    if (used != tok.size()) fail("malformed number '" + tok + "'");
    pos_ = end;
    return v;
  }
  int integer() {
    skip_ws();
    int v = 0;
    auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), v);
    if (ec != std::errc() || ptr == s_.data() + pos_) fail("expected an integer");
    pos_ = static_cast<std::size_t>(ptr - s_.data());
    return v;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError(line_, what + " at column " + std::to_string(pos_ + 1));
  }

 private:
  const std::string& s_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

struct RawTerm {
  Complex coeff;
  std::vector<std::pair<int, int>> factors;  // (1-based variable, exponent)
};

std::vector<RawTerm> parse_line(const std::string& text, std::size_t line) {
  LineParser p(text, line);
  std::vector<RawTerm> terms;
  while (true) {
    RawTerm t;
    p.expect('(');
    const double re = p.number();
    p.expect(',');
    const double im = p.number();
    p.expect(')');
    t.coeff = Complex(re, im);
    while (p.peek() == 'x') {
      p.expect('x');
      const int var = p.integer();
      if (var < 1) p.fail("variable index must be >= 1");
      int e = 1;
      if (p.peek() == '^') {
        p.expect('^');
        e = p.integer();
        if (e < 0) p.fail("negative exponent");
      }
      t.factors.emplace_back(var, e);
    }
    terms.push_back(std::move(t));
    if (p.done()) break;
    p.expect('+');
  }
  return terms;
}

}  // namespace

PolynomialSystem parse_system(const std::string& text) {
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  std::vector<std::pair<std::size_t, std::vector<RawTerm>>> lines;
  int max_var = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto first = raw.find_first_not_of(" \t\r");
    if (first == std::string::npos || raw[first] == '#') continue;
    auto terms = parse_line(raw, line);
    for (const RawTerm& t : terms)
      for (const auto& [v, e] : t.factors) max_var = std::max(max_var, v);
    lines.emplace_back(line, std::move(terms));
  }
  if (lines.empty()) throw ParseError(line == 0 ? 1 : line, "no equations");
  const int n = static_cast<int>(lines.size());
  std::vector<Polynomial> eqs;
  for (auto& [ln, terms] : lines) {
    Polynomial p;
    for (const RawTerm& t : terms) {
      Term term{t.coeff, unit_exps(n)};
      for (const auto& [v, e] : t.factors) {
        if (v > n)
          throw ParseError(ln, "variable x" + std::to_string(v) + " exceeds the equation count " + std::to_string(n));
        term.exps[v - 1] += e;
      }
      p.terms.push_back(std::move(term));
    }
    eqs.push_back(std::move(p));
  }
  return PolynomialSystem(n, std::move(eqs));
}

std::string format_system(const PolynomialSystem& system) {
  std::string out;
  char buf[96];
  for (const Polynomial& p : system.equations()) {
    bool first = true;
    if (p.terms.empty()) out += "(0,0)";
    for (const Term& t : p.terms) {
      if (!first) out += " + ";
      first = false;
      std::snprintf(buf, sizeof buf, "(%.17g,%.17g)", t.coeff.real(), t.coeff.imag());
      out += buf;
      for (std::size_t j = 0; j < t.exps.size(); ++j) {
        if (t.exps[j] == 0) continue;
        out += " x" + std::to_string(j + 1);
        if (t.exps[j] != 1) out += "^" + std::to_string(t.exps[j]);
      }
    }
    out += '\n';
  }
  return out;
}

// ------------------------------------------------------------------ generators

PolynomialSystem katsura(int n) {
  if (n < 1 || n > 10) throw ConfigError("katsura: n must be in [1, 10]");
  const int nv = n + 1;
  auto var = [nv](int idx) {
    auto e = unit_exps(nv);
    e[static_cast<std::size_t>(idx)] = 1;
    return e;
  };
  std::vector<Polynomial> eqs;
  // sum_{i=-n}^{n} x_|i| - 1
  Polynomial f0;
  f0.terms.push_back({1.0, var(0)});
  for (int i = 1; i <= n; ++i) f0.terms.push_back({2.0, var(i)});
  f0.terms.push_back({-1.0, unit_exps(nv)});
  eqs.push_back(std::move(f0));
  for (int k = 0; k < n; ++k) {
    Polynomial f;
    for (int i = -n; i <= n; ++i) {
      const int a = std::abs(i);
      const int b = std::abs(k - i);
      if (b > n) continue;
      auto e = unit_exps(nv);
      e[a] += 1;
      e[b] += 1;
      f.terms.push_back({1.0, e});
    }
    f.terms.push_back({-1.0, var(k)});
    eqs.push_back(std::move(f));
  }
  return PolynomialSystem(nv, std::move(eqs));
}

PolynomialSystem cyclic(int n) {
  if (n < 2 || n > 7) throw ConfigError("cyclic: n must be in [2, 7]");
  std::vector<Polynomial> eqs;
  for (int len = 1; len < n; ++len) {
    Polynomial f;
    for (int j = 0; j < n; ++j) {
      auto e = unit_exps(n);
      for (int k = 0; k < len; ++k) e[(j + k) % n] += 1;
      f.terms.push_back({1.0, e});
    }
    eqs.push_back(std::move(f));
  }
  eqs.push_back(make_poly({{1.0, std::vector<int>(static_cast<std::size_t>(n), 1)}, {-1.0, unit_exps(n)}}));
  return PolynomialSystem(n, std::move(eqs));
}

PolynomialSystem noon(int n, double c) {
  if (n < 2 || n > 5) throw ConfigError("noon: n must be in [2, 5]");
  std::vector<Polynomial> eqs;
  for (int i = 0; i < n; ++i) {
    Polynomial f;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      auto e = unit_exps(n);
      e[i] += 1;
      e[j] += 2;
      f.terms.push_back({1.0, e});
    }
    auto lin = unit_exps(n);
    lin[i] = 1;
    f.terms.push_back({-c, lin});
    f.terms.push_back({1.0, unit_exps(n)});
    eqs.push_back(std::move(f));
  }
  return PolynomialSystem(n, std::move(eqs));
}

PolynomialSystem chandra(int n, double c) {
  if (n < 2 || n > 9) throw ConfigError("chandra: n must be in [2, 9]");
  std::vector<Polynomial> eqs;
  const double two_n = 2.0 * n;
  for (int k = 1; k <= n; ++k) {
    Polynomial f;
    auto xk = unit_exps(n);
    xk[k - 1] = 1;
    // 2n x_k - c x_k - c x_k sum_i k/(i+k) x_i - 2n
    f.terms.push_back({two_n - c, xk});
    for (int i = 1; i <= n - 1; ++i) {
      auto e = xk;
      e[i - 1] += 1;
      f.terms.push_back({-c * k / static_cast<double>(i + k), e});
    }
    f.terms.push_back({-two_n, unit_exps(n)});
    eqs.push_back(std::move(f));
  }
  return PolynomialSystem(n, std::move(eqs));
}

PolynomialSystem benchmark_system(const std::string& name, int n) {
  if (name == "katsura") return katsura(n);
  if (name == "cyclic") return cyclic(n);
  if (name == "noon") return noon(n);
  if (name == "chandra") return chandra(n);
  throw ConfigError("unknown benchmark system '" + name + "'");
}

StartSystem total_degree_start(const PolynomialSystem& target, std::uint64_t seed, std::size_t max_roots,
                               std::uint64_t cap) {
  const int n = target.n_vars();
  const std::vector<int> deg = target.degrees();
  for (int d : deg)
    if (d < 1) throw PreconditionError("total_degree_start: every equation needs degree >= 1");
  const std::uint64_t bezout = target.bezout_number();
  if (max_roots == 0 && bezout > cap)
    throw ConfigError("Bezout count " + std::to_string(bezout) + " exceeds the cap; request an explicit subset");

  std::vector<Polynomial> eqs;
  for (int i = 0; i < n; ++i) {
    auto e = unit_exps(n);
    e[i] = deg[i];
    eqs.push_back(make_poly({{1.0, e}, {-1.0, unit_exps(n)}}));
  }
  StartSystem out{PolynomialSystem(n, std::move(eqs)), {}};

  auto root_of = [&](std::uint64_t index) {
    CVector x(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      const auto d = static_cast<std::uint64_t>(deg[i]);
      const auto k = index % d;
      index /= d;
      const double ang = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(d);
      x[i] = std::polar(1.0, ang);
    }
    return x;
  };

  if (max_roots == 0 || max_roots >= bezout) {
    out.roots.reserve(bezout);
    for (std::uint64_t r = 0; r < bezout; ++r) out.roots.push_back(root_of(r));
  } else {
    // Partial Fisher-Yates over indices, tracked sparsely.
    SeededRng rng(seed);
    std::map<std::uint64_t, std::uint64_t> swapped;
    auto at = [&](std::uint64_t i) {
      auto it = swapped.find(i);
      return it == swapped.end() ? i : it->second;
    };
    for (std::uint64_t r = 0; r < max_roots; ++r) {
      const std::uint64_t j = r + rng.below(bezout - r);
      const std::uint64_t vj = at(j);
      swapped[j] = at(r);
      out.roots.push_back(root_of(vj));
    }
  }
  return out;
}

}  // namespace npc::poly
