#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/rational.hpp>

namespace randten {

using Rational = boost::rational<std::int64_t>;

template <class T, class Coef>
T scalar_as(const Coef& c) {
  if constexpr (std::is_same_v<Coef, Rational> && !std::is_same_v<T, Rational> &&
                !std::is_constructible_v<T, const Rational&>)
    return T(boost::rational_cast<double>(c));
  else
    return T(c);
}

// Dense univariate polynomial sum_i c_i x^i with trailing zeros trimmed, so two
// polynomials compare equal iff their coefficients do. Coef is an exact field
// type (Rational) or a floating type.
template <class Coef>
class Polynomial {
 public:
  Polynomial() = default;
  Polynomial(const Coef& constant) : coeffs_{constant} { trim(); }  // NOLINT: scalars promote
  Polynomial(std::initializer_list<Coef> coeffs) : coeffs_(coeffs) { trim(); }
  explicit Polynomial(std::vector<Coef> coeffs) : coeffs_(std::move(coeffs)) { trim(); }

  static Polynomial x() { return Polynomial({Coef(0), Coef(1)}); }
  static Polynomial monomial(int degree, const Coef& c = Coef(1)) {
    std::vector<Coef> v(static_cast<std::size_t>(degree) + 1, Coef(0));
    v.back() = c;
    return Polynomial(std::move(v));
  }

  // -1 for the zero polynomial.
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  bool is_zero() const { return coeffs_.empty(); }
  Coef coeff(int i) const {
    return i >= 0 && i <= degree() ? coeffs_[static_cast<std::size_t>(i)] : Coef(0);
  }
  const std::vector<Coef>& coefficients() const { return coeffs_; }

  Polynomial derivative() const {
    std::vector<Coef> v;
    for (int i = 1; i <= degree(); ++i) v.push_back(coeffs_[static_cast<std::size_t>(i)] * Coef(i));
    return Polynomial(std::move(v));
  }

  // Horner evaluation. Rational coefficients are rounded to double when T is
  // a floating or complex type.
  template <class T>
  T operator()(const T& x) const {
    T acc = T(0);
    for (int i = degree(); i >= 0; --i) acc = acc * x + scalar_as<T>(coeffs_[static_cast<std::size_t>(i)]);
    return acc;
  }

  Polynomial operator-() const {
    Polynomial out = *this;
    for (auto& c : out.coeffs_) c = -c;
    return out;
  }

  friend Polynomial operator+(const Polynomial& a, const Polynomial& b) {
    std::vector<Coef> v(std::max(a.coeffs_.size(), b.coeffs_.size()), Coef(0));
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i) v[i] += a.coeffs_[i];
    for (std::size_t i = 0; i < b.coeffs_.size(); ++i) v[i] += b.coeffs_[i];
    return Polynomial(std::move(v));
  }
  friend Polynomial operator-(const Polynomial& a, const Polynomial& b) { return a + (-b); }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
    if (a.is_zero() || b.is_zero()) return {};
    std::vector<Coef> v(a.coeffs_.size() + b.coeffs_.size() - 1, Coef(0));
    for (std::size_t i = 0; i < a.coeffs_.size(); ++i)
      for (std::size_t j = 0; j < b.coeffs_.size(); ++j) v[i + j] += a.coeffs_[i] * b.coeffs_[j];
    return Polynomial(std::move(v));
  }
  friend Polynomial operator/(const Polynomial& a, const Coef& s) {
    Polynomial out = a;
    for (auto& c : out.coeffs_) c /= s;
    out.trim();
    return out;
  }
  friend bool operator==(const Polynomial& a, const Polynomial& b) { return a.coeffs_ == b.coeffs_; }

  friend std::ostream& operator<<(std::ostream& os, const Polynomial& p) {
    if (p.is_zero()) return os << "0";
    bool first = true;
    for (int i = p.degree(); i >= 0; --i) {
      const Coef c = p.coeffs_[static_cast<std::size_t>(i)];
      if (c == Coef(0)) continue;
      os << (first ? "" : " + ") << "(" << c << ")";
      if (i > 0) os << "x^" << i;
      first = false;
    }
    return os;
  }

 private:
  void trim() {
    while (!coeffs_.empty() && coeffs_.back() == Coef(0)) coeffs_.pop_back();
  }

  std::vector<Coef> coeffs_;
};

using RationalPolynomial = Polynomial<Rational>;

// Generalized Laguerre L_k^alpha(x) by the three-term recurrence
//   L_0 = 1,  L_1 = 1 + alpha - x,
//   L_{n+1} = ((2n + 1 + alpha - x) L_n - (n + alpha) L_{n-1}) / (n + 1).
// T may be double, Rational or RationalPolynomial (pass x()). alpha may be
// negative; L_k is taken as 0 for k < 0.
template <class T>
T laguerre(int k, int alpha, const T& x) {
  if (k < 0) return T(std::int64_t{0});
  T prev = T(std::int64_t{1});
  if (k == 0) return prev;
  T cur = T(std::int64_t{1 + alpha}) - x;
  for (int n = 1; n < k; ++n) {
    T next = ((T(std::int64_t{2 * n + 1 + alpha}) - x) * cur - T(std::int64_t{n + alpha}) * prev) /
             static_cast<std::int64_t>(n + 1);
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

// Probabilists' Hermite H_n: H_0 = 1, H_1 = x, H_{n+1} = x H_n - n H_{n-1}.
template <class T>
T hermite(int n, const T& x) {
  if (n < 0) return T(std::int64_t{0});
  T prev = T(std::int64_t{1});
  if (n == 0) return prev;
  T cur = x;
  for (int m = 1; m < n; ++m) {
    T next = x * cur - T(std::int64_t{m}) * prev;
    prev = std::move(cur);
    cur = std::move(next);
  }
  return cur;
}

inline RationalPolynomial laguerre_polynomial(int k, int alpha) {
  return laguerre(k, alpha, RationalPolynomial::x());
}

inline RationalPolynomial hermite_polynomial(int n) { return hermite(n, RationalPolynomial::x()); }

}  // namespace randten
