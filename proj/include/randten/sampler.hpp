#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <initializer_list>
#include <span>

#include "randten/tensor.hpp"

namespace randten {

// Name of the uniform-to-normal transform, recorded in result metadata.
inline constexpr const char* kNormalTransform = "box-muller";

// SplitMix64 finalizer: a bijective 64-bit mix.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-sensitive hash of a word sequence (absorbs each word through mix64).
std::uint64_t hash_words(std::uint64_t seed, std::span<const std::uint64_t> words);
std::uint64_t hash_words(std::uint64_t seed, std::initializer_list<std::uint64_t> words);

constexpr std::uint64_t zigzag(std::int64_t v) {
  return (static_cast<std::uint64_t>(v) << 1) ^ static_cast<std::uint64_t>(v >> 63);
}

// Uniform double in (0, 1).
constexpr double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

enum class FieldKind { Complex, Real };

// Counter-based Gaussian field over Z^d. sample(n) is a pure function of
// (master_seed, stream, n): complex samples are (xi1 + i xi2)/sqrt(2) so that
// E|g|^2 = 1, real samples are a single standard normal (imaginary part 0).
struct GaussianField {
  std::uint64_t master_seed = 0;
  std::uint32_t stream = 0;
  FieldKind kind = FieldKind::Complex;
  int d = 1;

  Complex sample(const LatticePoint& n) const;
};

template <class F>
concept SiteField = requires(const F& f, const LatticePoint& n) {
  { f.sample(n) } -> std::convertible_to<Complex>;
};

// a * first(n) + b * second(n).
template <SiteField F1, SiteField F2>
struct LinearField {
  F1 first;
  F2 second;
  double a = 1.0;
  double b = 0.0;

  Complex sample(const LatticePoint& n) const { return a * first.sample(n) + b * second.sample(n); }
};

// g(phi) = sin(phi) g + cos(phi) g_tilde.
inline LinearField<GaussianField, GaussianField> interpolate(const GaussianField& g, const GaussianField& g_tilde,
                                                              double phi) {
  return {g, g_tilde, std::sin(phi), std::cos(phi)};
}

// d/dphi g(phi) = cos(phi) g - sin(phi) g_tilde.
inline LinearField<GaussianField, GaussianField> phi_derivative_field(const GaussianField& g,
                                                                       const GaussianField& g_tilde, double phi) {
  return {g, g_tilde, std::cos(phi), -std::sin(phi)};
}

// Seed of the i-th independent unit derived from a master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t i) { return hash_words(seed, {0x5a11ULL, i}); }

}  // namespace randten
