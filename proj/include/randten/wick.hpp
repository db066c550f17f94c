#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "randten/polynomial.hpp"
#include "randten/sampler.hpp"
#include "randten/tensor.hpp"

namespace randten {

// A product of Gaussian factors g_{n_1}^{s_1} ... g_{n_k}^{s_k} with s = +1
// for g and -1 for conj(g). The empty spec (k = 0) denotes the constant 1.
struct ChaosSpec {
  std::vector<LatticePoint> points;
  std::vector<int> signs;

  std::size_t order() const { return points.size(); }
  // Throws Error on length mismatch or a sign outside {+1, -1}.
  void validate() const;
  // The spec with factor j removed.
  ChaosSpec without(std::size_t j) const;
  ChaosSpec conjugated() const;
};

// Occupation of one lattice site: sigma factors in total, mu = (#g - #conj g).
struct SiteProfile {
  LatticePoint site;
  int sigma = 0;
  int mu = 0;

  friend bool operator==(const SiteProfile&, const SiteProfile&) = default;
};

// One profile per distinct site of the spec, ordered by site.
std::vector<SiteProfile> site_profiles(const ChaosSpec& spec);

// Integer polynomial in (g, conj g) at a single site: terms[{a, b}] is the
// coefficient of g^a conj(g)^b.
struct SitePolynomial {
  std::map<std::pair<int, int>, std::int64_t> terms;

  std::int64_t coeff(int a, int b) const;
  int degree() const;
  SitePolynomial conjugated() const;
  Complex evaluate(Complex g) const;

  friend bool operator==(const SitePolynomial&, const SitePolynomial&) = default;
};

// Product over sites of independent single-site factors.
struct WickPolynomial {
  std::vector<std::pair<LatticePoint, SitePolynomial>> factors;

  template <SiteField F>
  Complex evaluate(const F& field) const {
    Complex value = 1.0;
    for (const auto& [site, poly] : factors) value *= poly.evaluate(field.sample(site));
    return value;
  }

  friend bool operator==(const WickPolynomial&, const WickPolynomial&) = default;
};

// Renormalized single-site product
//   (-1)^m m! L_m^{|mu|}(|g|^2) g^mu,   m = (sigma - |mu|)/2,
// with g^mu meaning conj(g)^{|mu|} for mu < 0. Throws Error unless
// |mu| <= sigma and sigma = mu (mod 2).
SitePolynomial renorm_factor_symbolic(int sigma, int mu);
WickPolynomial renorm_symbolic(const ChaosSpec& spec);

// Same factor evaluated in floating point through the numeric recurrence.
Complex renorm_factor(int sigma, int mu, Complex g);

template <SiteField F>
Complex renorm_evaluate(const ChaosSpec& spec, const F& field) {
  Complex value = 1.0;
  for (const auto& profile : site_profiles(spec)) value *= renorm_factor(profile.sigma, profile.mu, field.sample(profile.site));
  return value;
}

// Real case: prod over sites of H_sigma(g_n), using the real part of the field.
template <SiteField F>
double hermite_renorm_evaluate(std::span<const LatticePoint> points, const F& field) {
  std::map<LatticePoint, int> sigma;
  for (const auto& n : points) ++sigma[n];
  double value = 1.0;
  for (const auto& [site, count] : sigma) value *= hermite(count, Complex(field.sample(site)).real());
  return value;
}

// Exact expectation under independent standard complex Gaussians, using
// E[g^a conj(g)^b] = [a == b] a! per site.
Rational wick_expectation(const SitePolynomial& poly);
Rational wick_expectation(const WickPolynomial& poly);

// E[x^i] = i! for x = |g|^2 ~ Exp(1); exact expectation of a polynomial in |g|^2.
Rational exponential_expectation(const RationalPolynomial& p);

struct DerivativeCheck {
  Complex lhs;  // central difference of L(g(phi)) in phi
  Complex rhs;  // sum_j d/dphi[g_{n_j}^{s_j}(phi)] L(spec without j)(phi)
  double relative_error = 0.0;
};

// Compares the finite-difference phi-derivative of the renormalized product
// along g(phi) = sin(phi) g + cos(phi) g_tilde with the product-rule sum. The
// error is relative to sum_j |term_j|, the natural scale of the right side.
DerivativeCheck phi_derivative_check(const ChaosSpec& spec, const GaussianField& g, const GaussianField& g_tilde,
                                     double phi, double step);

nlohmann::json to_json(const WickPolynomial& poly);
WickPolynomial wick_polynomial_from_json(const nlohmann::json& j);

}  // namespace randten
