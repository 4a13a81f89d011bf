#pragma once

// Dense-exponent multivariate polynomials over double, graded monomial
// ordering, and the monomial basis used to index moment matrices.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace robust_ut::poly {

/// Coefficients with magnitude below this are dropped after arithmetic.
inline constexpr double kDropTolerance = 1e-14;

inline std::uint64_t binomial(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
  return r;
}

class Monomial {
 public:
  Monomial() = default;
  explicit Monomial(std::size_t n_vars) : exps_(n_vars, 0) {}
  explicit Monomial(std::vector<int> exponents) : exps_(std::move(exponents)) {
    for (int e : exps_)
      if (e < 0) throw std::invalid_argument("Monomial: negative exponent");
  }

  static Monomial unit(std::size_t n_vars, std::size_t var) {
    Monomial m(n_vars);
    m.exps_.at(var) = 1;
    return m;
  }

  std::size_t n_vars() const { return exps_.size(); }
  int degree() const { return std::accumulate(exps_.begin(), exps_.end(), 0); }
  int operator[](std::size_t i) const { return exps_[i]; }
  const std::vector<int>& exponents() const { return exps_; }

  Monomial operator*(const Monomial& o) const {
    if (o.n_vars() != n_vars()) throw std::invalid_argument("Monomial: variable count mismatch");
    Monomial r(*this);
    for (std::size_t i = 0; i < exps_.size(); ++i) r.exps_[i] += o.exps_[i];
    return r;
  }

  bool operator==(const Monomial&) const = default;

  double eval(std::span<const double> point) const {
    double t = 1.0;
    for (std::size_t i = 0; i < exps_.size(); ++i)
      for (int e = 0; e < exps_[i]; ++e) t *= point[i];
    return t;
  }

  std::string str() const {
    if (degree() == 0) return "1";
    std::ostringstream os;
    bool first = true;
    for (std::size_t i = 0; i < exps_.size(); ++i) {
      if (exps_[i] == 0) continue;
      if (!first) os << '*';
      first = false;
      os << 'x' << (i + 1);
      if (exps_[i] > 1) os << '^' << exps_[i];
    }
    return os.str();
  }

 private:
  std::vector<int> exps_;
};

/// Graded order: lower total degree first; within a degree, larger exponent
/// of x1 first, then x2, and so on. basis(2,2) = [1, x1, x2, x1^2, x1*x2, x2^2].
struct GradedLess {
  bool operator()(const Monomial& a, const Monomial& b) const {
    const int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    for (std::size_t i = 0; i < a.n_vars(); ++i)
      if (a[i] != b[i]) return a[i] > b[i];
    return false;
  }
};

namespace detail {
inline void append_degree(std::vector<Monomial>& out, std::vector<int>& cur, std::size_t pos, int remaining) {
  if (pos + 1 == cur.size()) {
    cur[pos] = remaining;
    out.emplace_back(cur);
    cur[pos] = 0;
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[pos] = e;
    append_degree(out, cur, pos + 1, remaining - e);
  }
  cur[pos] = 0;
}
}  // namespace detail

/// All monomials in `n_vars` variables of total degree <= max_degree, in
/// graded order. The constant monomial is first.
inline std::vector<Monomial> basis(std::size_t n_vars, int max_degree) {
  if (n_vars == 0) throw std::invalid_argument("basis: n_vars must be positive");
  if (max_degree < 0) throw std::invalid_argument("basis: negative degree");
  std::vector<Monomial> out;
  out.reserve(binomial(static_cast<int>(n_vars) + max_degree, max_degree));
  std::vector<int> cur(n_vars, 0);
  for (int d = 0; d <= max_degree; ++d) detail::append_degree(out, cur, 0, d);
  return out;
}

/// Number of monomials of degree <= d in n variables.
inline std::size_t basis_size(std::size_t n_vars, int max_degree) {
  return static_cast<std::size_t>(binomial(static_cast<int>(n_vars) + max_degree, max_degree));
}

/// Position of `m` within basis(m.n_vars(), max_degree), computed by ranking
/// rather than search.
inline std::size_t monomial_index(const Monomial& m, int max_degree) {
  const int d = m.degree();
  if (d > max_degree)
    throw std::out_of_range("monomial_index: degree " + std::to_string(d) + " exceeds " +
                            std::to_string(max_degree));
  const int n = static_cast<int>(m.n_vars());
  std::size_t idx = d == 0 ? 0 : basis_size(m.n_vars(), d - 1);
  int rem = d;
  for (int k = 0; k + 1 < n; ++k) {
    const int parts = n - k - 1;
    for (int e = rem; e > m[k]; --e) idx += binomial(rem - e + parts - 1, parts - 1);
    rem -= m[k];
  }
  return idx;
}

class Polynomial {
 public:
  using Terms = std::map<Monomial, double, GradedLess>;

  Polynomial() = default;
  explicit Polynomial(std::size_t n_vars) : n_(n_vars) {}

  static Polynomial constant(std::size_t n_vars, double c) {
    Polynomial p(n_vars);
    p.add_term(Monomial(n_vars), c);
    return p;
  }
  static Polynomial variable(std::size_t n_vars, std::size_t var) {
    Polynomial p(n_vars);
    p.add_term(Monomial::unit(n_vars, var), 1.0);
    return p;
  }

  std::size_t n_vars() const { return n_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
    return d;
  }

  double coefficient(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? 0.0 : it->second;
  }

  void add_term(const Monomial& m, double c) {
    if (m.n_vars() != n_) throw std::invalid_argument("Polynomial: monomial has wrong variable count");
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) it->second += c;
    if (std::abs(it->second) < kDropTolerance) terms_.erase(it);
  }

  double operator()(std::span<const double> point) const { return eval(point); }

  double eval(std::span<const double> point) const {
    if (point.size() != n_)
      throw std::invalid_argument("Polynomial::eval: point has " + std::to_string(point.size()) +
                                  " coordinates, expected " + std::to_string(n_));
    double s = 0.0;
    for (const auto& [m, c] : terms_) s += c * m.eval(point);
    return s;
  }

  Polynomial operator-() const {
    Polynomial r(*this);
    for (auto& [m, c] : r.terms_) c = -c;
    return r;
  }

  Polynomial& operator+=(const Polynomial& o) {
    check_same(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Polynomial& operator-=(const Polynomial& o) { return *this += -o; }
  Polynomial& operator*=(double s) {
    Polynomial r(n_);
    for (const auto& [m, c] : terms_) r.add_term(m, c * s);
    return *this = std::move(r);
  }

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator+(Polynomial a, double c) { return a += constant(a.n_vars(), c); }
  friend Polynomial operator-(Polynomial a, double c) { return a -= constant(a.n_vars(), c); }
  friend Polynomial operator-(double c, const Polynomial& a) { return constant(a.n_vars(), c) - a; }

  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    a.check_same(b);
    Polynomial r(a.n_);
    for (const auto& [ma, ca] : a.terms_)
      for (const auto& [mb, cb] : b.terms_) r.add_term(ma * mb, ca * cb);
    return r;
  }

  std::string str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
      if (!first) os << (c < 0 ? " - " : " + ");
      else if (c < 0) os << '-';
      first = false;
      os << std::abs(c);
      if (m.degree() > 0) os << '*' << m.str();
    }
    return os.str();
  }

 private:
  void check_same(const Polynomial& o) const {
    if (o.n_ != n_) throw std::invalid_argument("Polynomial: variable count mismatch");
  }

  std::size_t n_ = 0;
  Terms terms_;
};

inline Polynomial poly_add(const Polynomial& a, const Polynomial& b) { return a + b; }
inline Polynomial poly_mul(const Polynomial& a, const Polynomial& b) { return a * b; }
inline double poly_eval(const Polynomial& p, std::span<const double> point) { return p.eval(point); }

inline Polynomial pow(const Polynomial& p, int k) {
  Polynomial r = Polynomial::constant(p.n_vars(), 1.0);
  for (int i = 0; i < k; ++i) r = r * p;
  return r;
}

/// Re-expresses `p` in `n_total` variables, mapping variable i to i + offset.
inline Polynomial embed(const Polynomial& p, std::size_t n_total, std::size_t offset) {
  if (offset + p.n_vars() > n_total) throw std::invalid_argument("embed: target too small");
  Polynomial r(n_total);
  for (const auto& [m, c] : p.terms()) {
    std::vector<int> e(n_total, 0);
    for (std::size_t i = 0; i < m.n_vars(); ++i) e[i + offset] = m[i];
    r.add_term(Monomial(std::move(e)), c);
  }
  return r;
}

/// Substitutes x_i -> shift[i] + scale[i] * x_i.
inline Polynomial affine_substitute(const Polynomial& p, std::span<const double> shift,
                                    std::span<const double> scale) {
  const std::size_t n = p.n_vars();
  if (shift.size() != n || scale.size() != n) throw std::invalid_argument("affine_substitute: dimension mismatch");
  // powers[i][k] = (shift_i + scale_i x_i)^k, built lazily
  std::vector<std::vector<Polynomial>> powers(n);
  auto power = [&](std::size_t i, int k) -> const Polynomial& {
    auto& v = powers[i];
    if (v.empty()) v.push_back(Polynomial::constant(n, 1.0));
    const Polynomial lin = Polynomial::constant(n, shift[i]) + scale[i] * Polynomial::variable(n, i);
    while (static_cast<int>(v.size()) <= k) v.push_back(v.back() * lin);
    return v[k];
  };
  Polynomial r(n);
  for (const auto& [m, c] : p.terms()) {
    Polynomial t = Polynomial::constant(n, c);
    for (std::size_t i = 0; i < n; ++i)
      if (m[i] > 0) t = t * power(i, m[i]);
    r += t;
  }
  return r;
}

}  // namespace robust_ut::poly
