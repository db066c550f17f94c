#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "randten/polynomial.hpp"

namespace randten {

struct VerificationReport {
  std::string name;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;  // largest violation seen, where the check is numeric
  std::vector<std::string> messages;  // first few failures

  bool ok() const { return failures == 0; }
  void fail(std::string message);
};

// E[p(X)] for a standard real Gaussian X, exactly: E[X^{2m}] = (2m - 1)!!.
Rational gaussian_expectation(const RationalPolynomial& p);

// Exact gates.
VerificationReport verify_renorm_table();
// Zero mean of the renormalized product for every chaos of order <= max_k
// with all sign patterns and all assignments of factors to <= max_sites sites.
VerificationReport verify_zero_mean(int max_k = 6, int max_sites = 3);
// Listed Laguerre/Hermite polynomials, Laguerre derivative identities,
// Laguerre orthogonality, and the defining Hermite properties.
VerificationReport verify_polynomial_identities(int max_degree = 5, int max_hermite = 8);

// Finite-difference phi-derivative of the renormalized product under the
// interpolation g(phi) against the sum over factors; random specs of order
// 1..4 on <= 3 sites (pairings included). worst = largest relative error.
VerificationReport verify_phi_derivative(std::size_t cases, std::uint64_t seed, double step = 1e-5,
                                         double tolerance = 1e-6);

// Randomized norm gates; relative slack threshold 1e-8.
VerificationReport verify_merging(std::size_t trials, std::uint64_t seed);
VerificationReport verify_duality(std::size_t trials, std::uint64_t seed, std::size_t max_labels = 6);

}  // namespace randten
