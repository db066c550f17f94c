#include "randten/sampler.hpp"

#include <numbers>
#include <vector>

namespace randten {

std::uint64_t hash_words(std::uint64_t seed, std::span<const std::uint64_t> words) {
  std::uint64_t state = mix64(seed ^ 0x6a09e667f3bcc908ULL);
  for (std::uint64_t w : words) state = mix64(state ^ mix64(w));
  return state;
}

std::uint64_t hash_words(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  return hash_words(seed, std::span<const std::uint64_t>(words.begin(), words.size()));
}

Complex GaussianField::sample(const LatticePoint& n) const {
  // Length-prefixed zig-zag encoding keeps (stream, n) injective across d.
  std::uint64_t buffer[16];
  std::vector<std::uint64_t> heap;
  const std::size_t len = n.coords.size() + 2;
  std::uint64_t* words = buffer;
  if (len > 16) {
    heap.resize(len);
    words = heap.data();
  }
  words[0] = stream;
  words[1] = n.coords.size();
  for (std::size_t i = 0; i < n.coords.size(); ++i) words[i + 2] = zigzag(n.coords[i]);
  const std::uint64_t key = hash_words(master_seed, std::span<const std::uint64_t>(words, len));

  const double u1 = to_unit_open(mix64(key ^ 0x243f6a8885a308d3ULL));
  const double u2 = to_unit_open(mix64(key ^ 0x13198a2e03707344ULL));
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  if (kind == FieldKind::Real) return {r * std::cos(theta), 0.0};
  return Complex(r * std::cos(theta), r * std::sin(theta)) * (1.0 / std::numbers::sqrt2);
}

}  // namespace randten
