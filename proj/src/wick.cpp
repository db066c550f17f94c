#include "randten/wick.hpp"

#include <cstdlib>

#include "randten/errors.hpp"

namespace randten {

void ChaosSpec::validate() const {
  if (points.size() != signs.size())
    throw Error("chaos spec has " + std::to_string(points.size()) + " points but " + std::to_string(signs.size()) +
                " signs");
  for (int s : signs)
    if (s != 1 && s != -1) throw Error("chaos signs must be +1 or -1");
}

ChaosSpec ChaosSpec::without(std::size_t j) const {
  ChaosSpec out = *this;
  out.points.erase(out.points.begin() + static_cast<std::ptrdiff_t>(j));
  out.signs.erase(out.signs.begin() + static_cast<std::ptrdiff_t>(j));
  return out;
}

ChaosSpec ChaosSpec::conjugated() const {
  ChaosSpec out = *this;
  for (int& s : out.signs) s = -s;
  return out;
}

std::vector<SiteProfile> site_profiles(const ChaosSpec& spec) {
  spec.validate();
  std::map<LatticePoint, std::pair<int, int>> counts;
  for (std::size_t j = 0; j < spec.points.size(); ++j) {
    auto& [sigma, mu] = counts[spec.points[j]];
    ++sigma;
    mu += spec.signs[j];
  }
  std::vector<SiteProfile> out;
  out.reserve(counts.size());
  for (const auto& [site, c] : counts) out.push_back({site, c.first, c.second});
  return out;
}

std::int64_t SitePolynomial::coeff(int a, int b) const {
  auto it = terms.find({a, b});
  return it == terms.end() ? 0 : it->second;
}

int SitePolynomial::degree() const {
  int deg = -1;
  for (const auto& [ab, c] : terms) deg = std::max(deg, ab.first + ab.second);
  return deg;
}

SitePolynomial SitePolynomial::conjugated() const {
  SitePolynomial out;
  for (const auto& [ab, c] : terms) out.terms[{ab.second, ab.first}] = c;
  return out;
}

Complex SitePolynomial::evaluate(Complex g) const {
  const Complex gbar = std::conj(g);
  Complex value = 0.0;
  for (const auto& [ab, c] : terms)
    value += static_cast<double>(c) * std::pow(g, ab.first) * std::pow(gbar, ab.second);
  return value;
}

namespace {

void check_profile(int sigma, int mu) {
  if (sigma < 0 || std::abs(mu) > sigma || (sigma - std::abs(mu)) % 2 != 0)
    throw Error("invalid site profile sigma=" + std::to_string(sigma) + " mu=" + std::to_string(mu));
}

std::int64_t factorial(int n) {
  std::int64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

}  // namespace

SitePolynomial renorm_factor_symbolic(int sigma, int mu) {
  check_profile(sigma, mu);
  const int alpha = std::abs(mu);
  const int m = (sigma - alpha) / 2;
  const Rational prefactor((m % 2 ? -1 : 1) * factorial(m));
  const RationalPolynomial lag = laguerre_polynomial(m, alpha);

  SitePolynomial out;
  for (int i = 0; i <= lag.degree(); ++i) {
    const Rational c = prefactor * lag.coeff(i);
    if (c == Rational(0)) continue;
    if (c.denominator() != 1) throw Error("renormalization coefficient is not an integer");
    // |g|^{2i} g^mu = g^{i + alpha} conj(g)^i, conjugated when mu < 0.
    const std::pair<int, int> ab = mu >= 0 ? std::pair{i + alpha, i} : std::pair{i, i + alpha};
    out.terms[ab] = c.numerator();
  }
  return out;
}

WickPolynomial renorm_symbolic(const ChaosSpec& spec) {
  WickPolynomial out;
  for (const auto& p : site_profiles(spec)) out.factors.emplace_back(p.site, renorm_factor_symbolic(p.sigma, p.mu));
  return out;
}

Complex renorm_factor(int sigma, int mu, Complex g) {
  check_profile(sigma, mu);
  if (sigma == 0) return 1.0;
  const int alpha = std::abs(mu);
  const int m = (sigma - alpha) / 2;
  const double lag = laguerre(m, alpha, std::norm(g));
  const double prefactor = static_cast<double>((m % 2 ? -1 : 1) * factorial(m));
  const Complex base = mu >= 0 ? g : std::conj(g);
  Complex power = 1.0;
  for (int i = 0; i < alpha; ++i) power *= base;
  return prefactor * lag * power;
}

Rational wick_expectation(const SitePolynomial& poly) {
  Rational e = 0;
  for (const auto& [ab, c] : poly.terms)
    if (ab.first == ab.second) e += Rational(c) * Rational(factorial(ab.first));
  return e;
}

Rational wick_expectation(const WickPolynomial& poly) {
  Rational e = 1;
  for (const auto& [site, factor] : poly.factors) e *= wick_expectation(factor);
  return e;
}

Rational exponential_expectation(const RationalPolynomial& p) {
  Rational e = 0;
  for (int i = 0; i <= p.degree(); ++i) e += p.coeff(i) * Rational(factorial(i));
  return e;
}

DerivativeCheck phi_derivative_check(const ChaosSpec& spec, const GaussianField& g, const GaussianField& g_tilde,
                                     double phi, double step) {
  spec.validate();
  DerivativeCheck check;
  check.lhs = (renorm_evaluate(spec, interpolate(g, g_tilde, phi + step)) -
               renorm_evaluate(spec, interpolate(g, g_tilde, phi - step))) /
              (2.0 * step);

  const auto at_phi = interpolate(g, g_tilde, phi);
  const auto velocity = phi_derivative_field(g, g_tilde, phi);
  double scale = 0.0;
  for (std::size_t j = 0; j < spec.order(); ++j) {
    Complex dg = velocity.sample(spec.points[j]);
    if (spec.signs[j] < 0) dg = std::conj(dg);
    const Complex term = dg * renorm_evaluate(spec.without(j), at_phi);
    check.rhs += term;
    scale += std::abs(term);
  }
  const double diff = std::abs(check.lhs - check.rhs);
  check.relative_error = scale > 0.0 ? diff / scale : diff;
  return check;
}

nlohmann::json to_json(const WickPolynomial& poly) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [site, factor] : poly.factors) {
    nlohmann::json terms = nlohmann::json::array();
    for (const auto& [ab, c] : factor.terms) terms.push_back({ab.first, ab.second, c});
    out.push_back({{"site", site.coords}, {"terms", terms}});
  }
  return out;
}

WickPolynomial wick_polynomial_from_json(const nlohmann::json& j) {
  WickPolynomial out;
  for (const auto& f : j) {
    SitePolynomial poly;
    for (const auto& t : f.at("terms"))
      poly.terms[{t.at(0).get<int>(), t.at(1).get<int>()}] = t.at(2).get<std::int64_t>();
    out.factors.emplace_back(LatticePoint(f.at("site").get<std::vector<int>>()), std::move(poly));
  }
  return out;
}

}  // namespace randten
