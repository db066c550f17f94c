#include "randten/verify.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "randten/families.hpp"
#include "randten/norms.hpp"
#include "randten/sampler.hpp"
#include "randten/wick.hpp"

namespace randten {

void VerificationReport::fail(std::string message) {
  ++failures;
  if (messages.size() < 8) messages.push_back(std::move(message));
}

Rational gaussian_expectation(const RationalPolynomial& p) {
  Rational e = 0;
  std::int64_t double_factorial = 1;  // (2m - 1)!!
  for (int i = 0; i <= p.degree(); i += 2) {
    if (i > 0) double_factorial *= i - 1;
    e += p.coeff(i) * Rational(double_factorial);
  }
  return e;
}

VerificationReport verify_renorm_table() {
  VerificationReport r;
  r.name = "renorm-table";
  struct Row {
    int sigma, mu;
    SitePolynomial expected;
  };
  const std::vector<Row> rows{
      {4, 4, {{{{4, 0}, 1}}}},
      {4, 2, {{{{3, 1}, 1}, {{2, 0}, -3}}}},
      {4, 0, {{{{2, 2}, 1}, {{1, 1}, -4}, {{0, 0}, 2}}}},
      {2, 0, {{{{1, 1}, 1}, {{0, 0}, -1}}}},
  };
  for (const auto& row : rows) {
    ++r.cases;
    if (!(renorm_factor_symbolic(row.sigma, row.mu) == row.expected))
      r.fail("renormalization of (" + std::to_string(row.sigma) + ", " + std::to_string(row.mu) + ") differs");
  }
  return r;
}

VerificationReport verify_zero_mean(int max_k, int max_sites) {
  VerificationReport r;
  r.name = "zero-mean";
  for (int k = 1; k <= max_k; ++k) {
    std::vector<int> site(static_cast<std::size_t>(k), 0);
    // All maps {1..k} -> {0..max_sites-1} times all sign patterns.
    while (true) {
      for (unsigned mask = 0; mask < (1U << k); ++mask) {
        ChaosSpec spec;
        for (int j = 0; j < k; ++j) {
          spec.points.push_back({site[static_cast<std::size_t>(j)]});
          spec.signs.push_back((mask >> j) & 1U ? -1 : 1);
        }
        ++r.cases;
        const Rational e = wick_expectation(renorm_symbolic(spec));
        if (e != Rational(0)) {
          std::ostringstream os;
          os << "k=" << k << " mask=" << mask << " expectation " << e;
          r.fail(os.str());
        }
      }
      int pos = k - 1;
      while (pos >= 0 && ++site[static_cast<std::size_t>(pos)] == max_sites) site[static_cast<std::size_t>(pos--)] = 0;
      if (pos < 0) break;
    }
  }
  return r;
}

VerificationReport verify_polynomial_identities(int max_degree, int max_hermite) {
  VerificationReport r;
  r.name = "polynomial-identities";
  using P = RationalPolynomial;
  auto check = [&r](bool ok, const std::string& what) {
    ++r.cases;
    if (!ok) r.fail(what);
  };

  const std::vector<P> laguerre_list{
      P{1},
      P{1, -1},
      P{{1, -2, Rational(1, 2)}},
      P{{1, -3, Rational(3, 2), Rational(-1, 6)}},
      P{{1, -4, 3, Rational(-2, 3), Rational(1, 24)}},
  };
  for (int m = 0; m < static_cast<int>(laguerre_list.size()); ++m)
    check(laguerre_polynomial(m, 0) == laguerre_list[static_cast<std::size_t>(m)], "L_" + std::to_string(m));

  const std::vector<P> hermite_list{P{1}, P{0, 1}, P{-1, 0, 1}, P{0, -3, 0, 1}, P{3, 0, -6, 0, 1}};
  for (int n = 0; n < static_cast<int>(hermite_list.size()); ++n)
    check(hermite_polynomial(n) == hermite_list[static_cast<std::size_t>(n)], "H_" + std::to_string(n));

  const P x = P::x();
  for (int m = 0; m <= max_degree; ++m)
    for (int alpha = 0; alpha <= max_degree; ++alpha) {
      const std::string tag = " m=" + std::to_string(m) + " alpha=" + std::to_string(alpha);
      check(laguerre_polynomial(m, alpha).derivative() == -laguerre_polynomial(m - 1, alpha + 1),
            "d/dx L_m^alpha = -L_{m-1}^{alpha+1}" + tag);
      // x d/dx[x^alpha L_m^alpha] = (m + alpha) x^alpha L_m^{alpha-1}, cleared of x^{-1}.
      const P x_alpha = P::monomial(alpha);
      check(x * (x_alpha * laguerre_polynomial(m, alpha)).derivative() ==
                P(Rational(m + alpha)) * x_alpha * laguerre_polynomial(m, alpha - 1),
            "d/dx x^alpha L_m^alpha = (m+alpha) x^(alpha-1) L_m^(alpha-1)" + tag);
    }

  for (int m = 0; m <= max_degree; ++m)
    for (int n = 0; n <= max_degree; ++n)
      if (m != n)
        check(exponential_expectation(laguerre_polynomial(m, 0) * laguerre_polynomial(n, 0)) == Rational(0),
              "orthogonality L_" + std::to_string(m) + " L_" + std::to_string(n));

  for (int n = 1; n <= max_hermite; ++n) {
    check(hermite_polynomial(n).derivative() == P(Rational(n)) * hermite_polynomial(n - 1),
          "H_" + std::to_string(n) + "' = n H_{n-1}");
    check(gaussian_expectation(hermite_polynomial(n)) == Rational(0), "E[H_" + std::to_string(n) + "(X)] = 0");
  }
  return r;
}

namespace {

std::vector<IndexLabel> make_labels(const std::string& prefix, int count) {
  std::vector<IndexLabel> out;
  for (int i = 0; i < count; ++i) out.push_back({prefix + std::to_string(i), LabelGroup::A});
  return out;
}

std::vector<std::string> names(const std::vector<IndexLabel>& labels) {
  std::vector<std::string> out;
  for (const auto& l : labels) out.push_back(l.name);
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::uint64_t pick(std::uint64_t seed, std::uint64_t trial, std::uint64_t salt, std::uint64_t n) {
  return hash_words(seed, {trial, salt}) % n;
}

}  // namespace

VerificationReport verify_phi_derivative(std::size_t cases, std::uint64_t seed, double step, double tolerance) {
  VerificationReport r;
  r.name = "phi-derivative";
  for (std::size_t c = 0; c < cases; ++c) {
    ChaosSpec spec;
    const int k = 1 + static_cast<int>(pick(seed, c, 1, 4));
    for (int j = 0; j < k; ++j) {
      const auto jj = static_cast<std::uint64_t>(j);
      spec.points.push_back({static_cast<int>(pick(seed, c, 10 + jj, 3)) - 1});
      spec.signs.push_back(pick(seed, c, 20 + jj, 2) == 0 ? 1 : -1);
    }
    const double phi = 2.0 * std::numbers::pi * to_unit_open(hash_words(seed, {c, 2}));
    const std::uint64_t field_seed = hash_words(seed, {c, 3});
    const GaussianField g{field_seed, 0}, g_tilde{field_seed, 1};
    const DerivativeCheck check = phi_derivative_check(spec, g, g_tilde, phi, step);
    ++r.cases;
    r.worst = std::max(r.worst, check.relative_error);
    if (!(check.relative_error <= tolerance))
      r.fail("case " + std::to_string(c) + " relative error " + std::to_string(check.relative_error));
  }
  return r;
}

VerificationReport verify_merging(std::size_t trials, std::uint64_t seed) {
  VerificationReport r;
  r.name = "merging";
  const NormOptions options;
  for (std::size_t t = 0; t < trials; ++t) {
    // Label counts in {0, 1, 2} for A1, B1, A2, B2 and {0, 1} for C, keeping each
    // factor at rank <= 4 so the box product stays small.
    const int n_c = static_cast<int>(pick(seed, t, 1, 2));
    int n_a1 = static_cast<int>(pick(seed, t, 2, 3)), n_b1 = static_cast<int>(pick(seed, t, 3, 3));
    int n_a2 = static_cast<int>(pick(seed, t, 4, 3)), n_b2 = static_cast<int>(pick(seed, t, 5, 3));
    while (n_a1 + n_b1 + n_c > 4) n_a1 > 0 ? --n_a1 : --n_b1;
    while (n_a2 + n_b2 + n_c > 4) n_a2 > 0 ? --n_a2 : --n_b2;
    const int N = 1 + static_cast<int>(pick(seed, t, 6, 2));
    const double density = 0.15 + 0.7 * to_unit_open(hash_words(seed, {t, 7}));

    const auto a1 = make_labels("a1_", n_a1), b1 = make_labels("b1_", n_b1), c = make_labels("c", n_c);
    const auto a2 = make_labels("a2_", n_a2), b2 = make_labels("b2_", n_b2);
    std::vector<IndexLabel> l1 = a1, l2 = a2;
    l1.insert(l1.end(), b1.begin(), b1.end());
    l1.insert(l1.end(), c.begin(), c.end());
    l2.insert(l2.end(), b2.begin(), b2.end());
    l2.insert(l2.end(), c.begin(), c.end());
    const Tensor h1 = random_sparse_tensor(l1, 1, N, density, hash_words(seed, {t, 8}));
    const Tensor h2 = random_sparse_tensor(l2, 1, N, density, hash_words(seed, {t, 9}));

    const Tensor merged = merge(h1, h2, names(c));
    const double lhs = tensor_norm(merged, split_labels(merged, concat(names(a1), names(a2))), options).value;
    const double rhs = tensor_norm(h1, split_labels(h1, names(a1)), options).value *
                       tensor_norm(h2, split_labels(h2, concat(names(a2), names(c))), options).value;
    const double scale = std::max(lhs, rhs);
    const double slack = scale > 0.0 ? (rhs - lhs) / scale : 0.0;
    ++r.cases;
    r.worst = std::min(r.worst, slack);
    if (slack < -1e-8) r.fail("trial " + std::to_string(t) + " relative slack " + std::to_string(slack));
  }
  return r;
}

VerificationReport verify_duality(std::size_t trials, std::uint64_t seed, std::size_t max_labels) {
  VerificationReport r;
  r.name = "duality";
  const NormOptions options;
  for (std::size_t t = 0; t < trials; ++t) {
    const int rank = 1 + static_cast<int>(pick(seed, t, 1, max_labels));
    const int N = rank <= 4 ? 1 + static_cast<int>(pick(seed, t, 2, 2)) : 1;
    const double density = 0.1 + 0.8 * to_unit_open(hash_words(seed, {t, 3}));
    const Tensor h = random_sparse_tensor(make_labels("x", rank), 1, N, density, hash_words(seed, {t, 4}));
    const Tensor hbar = conjugate(h);
    for (const auto& p : enumerate_partitions(h.labels())) {
      const double forward = tensor_norm(h, p, options).value;
      const double backward = tensor_norm(h, Partition{p.y_side, p.x_side}, options).value;
      const double conj_norm = tensor_norm(hbar, p, options).value;
      const double scale = std::max(1.0, forward);
      const double gap = std::max(std::abs(forward - backward), std::abs(forward - conj_norm)) / scale;
      ++r.cases;
      r.worst = std::max(r.worst, gap);
      if (gap > 1e-8) r.fail("trial " + std::to_string(t) + " " + to_string(p) + " gap " + std::to_string(gap));
    }
  }
  return r;
}

}  // namespace randten
