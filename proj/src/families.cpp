#include "randten/families.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "randten/errors.hpp"
#include "randten/sampler.hpp"

namespace randten {

std::vector<IndexLabel> FamilyShape::labels() const {
  std::vector<IndexLabel> out;
  for (int i = 1; i <= k; ++i) out.push_back(j_label(i));
  for (int i = 1; i <= a_count; ++i) out.push_back(a_label(i));
  for (int i = 1; i <= b_count; ++i) out.push_back(b_label(i));
  return out;
}

const std::vector<std::string>& sweep_family_names() {
  static const std::vector<std::string> names{"dense-gaussian", "sparse-gaussian", "diagonal-pairing", "rank-one",
                                              "random-sign"};
  return names;
}

std::vector<LatticePoint> family_window(int d, int N, std::size_t window_size, std::uint64_t seed) {
  std::vector<LatticePoint> box = lattice_box(d, N);
  if (window_size >= box.size()) return box;
  std::vector<std::uint64_t> keys(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) keys[i] = hash_words(seed, {0x3b1dULL, i});
  std::vector<std::size_t> order(box.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return keys[x] < keys[y]; });
  std::vector<LatticePoint> out;
  for (std::size_t i = 0; i < window_size; ++i) out.push_back(box[order[i]]);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

// Largest m with m^rank <= budget (at least 1).
std::size_t window_for(double budget, int rank) {
  if (rank <= 0) return 1;
  auto m = static_cast<std::size_t>(std::floor(std::pow(budget, 1.0 / rank) + 1e-9));
  return std::max<std::size_t>(1, m);
}

// Visits every tuple of window indices of the given length.
template <class Visit>
void for_each_tuple(std::size_t window, int length, Visit&& visit) {
  std::vector<std::size_t> t(static_cast<std::size_t>(length), 0);
  if (window == 0) return;
  while (true) {
    visit(t);
    int pos = length - 1;
    while (pos >= 0 && ++t[static_cast<std::size_t>(pos)] == window) t[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) return;
  }
}

FlatIndex flatten(const std::vector<LatticePoint>& window, const std::vector<std::size_t>& tuple) {
  FlatIndex index;
  for (std::size_t t : tuple) index.insert(index.end(), window[t].coords.begin(), window[t].coords.end());
  return index;
}

Complex gaussian_at(std::uint64_t seed, const FlatIndex& index) {
  return GaussianField{seed, 7, FieldKind::Complex}.sample(LatticePoint(index));
}

double uniform_at(std::uint64_t seed, const FlatIndex& index, std::uint64_t salt) {
  std::vector<std::uint64_t> words{salt};
  for (int c : index) words.push_back(zigzag(c));
  return to_unit_open(hash_words(seed, words));
}

}  // namespace

Tensor generate_family(const std::string& name, const FamilyShape& shape, const FamilyParams& params,
                       std::uint64_t seed) {
  if (shape.k < 1 || shape.a_count < 0 || shape.b_count < 0 || shape.d < 1 || shape.N < 0)
    throw ConfigError("invalid family shape");
  const int rank = shape.k + shape.a_count + shape.b_count;
  const auto labels = shape.labels();
  const double budget = static_cast<double>(std::max<std::size_t>(1, params.budget));
  std::vector<TensorEntry> entries;

  if (name == "diagonal-series" || name == "identity-series") {
    if (shape.k != 1 || shape.a_count != 1 || shape.b_count != 1)
      throw ConfigError(name + " requires k = 1 and |A| = |B| = 1");
    const auto box = lattice_box(shape.d, shape.N);
    for (const auto& n : box) {
      FlatIndex index;
      if (name == "diagonal-series") {
        for (int r = 0; r < 3; ++r) index.insert(index.end(), n.coords.begin(), n.coords.end());
      } else {
        index.assign(static_cast<std::size_t>(shape.d), 0);
        for (int r = 0; r < 2; ++r) index.insert(index.end(), n.coords.begin(), n.coords.end());
      }
      entries.push_back({index, 1.0});
    }
    return make_tensor(labels, shape.d, shape.N, entries);
  }

  const std::uint64_t window_seed = hash_words(seed, {0x77ULL});
  if (name == "dense-gaussian" || name == "random-sign" || name == "sparse-gaussian") {
    const double density = name == "sparse-gaussian" ? params.density : 1.0;
    if (!(density > 0.0 && density <= 1.0)) throw ConfigError("density must lie in (0, 1]");
    const auto window = family_window(shape.d, shape.N, window_for(budget / density, rank), window_seed);
    for_each_tuple(window.size(), rank, [&](const std::vector<std::size_t>& t) {
      FlatIndex index = flatten(window, t);
      if (name == "sparse-gaussian" && uniform_at(seed, index, 0x5) >= density) return;
      Complex v = name == "random-sign" ? Complex(uniform_at(seed, index, 0x51) < 0.5 ? -1.0 : 1.0)
                                        : gaussian_at(seed, index);
      entries.push_back({std::move(index), v});
    });
  } else if (name == "diagonal-pairing") {
    if (rank < 2) throw ConfigError("diagonal-pairing needs at least two axes");
    // Axis 1 (j2, or a1 when k = 1) repeats axis 0.
    const auto window = family_window(shape.d, shape.N, window_for(budget, rank - 1), window_seed);
    for_each_tuple(window.size(), rank - 1, [&](const std::vector<std::size_t>& t) {
      std::vector<std::size_t> full = t;
      full.insert(full.begin() + 1, t[0]);
      FlatIndex index = flatten(window, full);
      entries.push_back({index, gaussian_at(seed, index)});
    });
  } else if (name == "rank-one") {
    const auto window = family_window(shape.d, shape.N, window_for(budget, rank), window_seed);
    std::vector<std::vector<Complex>> factors(static_cast<std::size_t>(rank));
    for (int axis = 0; axis < rank; ++axis) {
      auto& u = factors[static_cast<std::size_t>(axis)];
      double norm2 = 0.0;
      for (std::size_t s = 0; s < window.size(); ++s) {
        u.push_back(gaussian_at(hash_words(seed, {0x1ULL, static_cast<std::uint64_t>(axis)}), window[s].coords));
        norm2 += std::norm(u.back());
      }
      for (auto& v : u) v /= std::sqrt(norm2);
    }
    for_each_tuple(window.size(), rank, [&](const std::vector<std::size_t>& t) {
      Complex v = 1.0;
      for (int axis = 0; axis < rank; ++axis) v *= factors[static_cast<std::size_t>(axis)][t[static_cast<std::size_t>(axis)]];
      entries.push_back({flatten(window, t), v});
    });
  } else {
    throw ConfigError("unknown tensor family '" + name + "'");
  }
  return make_tensor(labels, shape.d, shape.N, entries);
}

Tensor random_sparse_tensor(std::vector<IndexLabel> labels, int d, int N, double density, std::uint64_t seed) {
  const auto box = lattice_box(d, N);
  std::vector<TensorEntry> entries;
  for_each_tuple(box.size(), static_cast<int>(labels.size()), [&](const std::vector<std::size_t>& t) {
    FlatIndex index = flatten(box, t);
    if (uniform_at(seed, index, 0x9) >= density) return;
    entries.push_back({index, gaussian_at(seed, index)});
  });
  return make_tensor(std::move(labels), d, N, entries);
}

}  // namespace randten
