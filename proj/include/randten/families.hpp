#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "randten/tensor.hpp"

namespace randten {

// Axis counts of a generated tensor h_{n_J n_A n_B}; labels are j1..jk, a1.., b1...
struct FamilyShape {
  int k = 1;
  int a_count = 1;
  int b_count = 1;
  int d = 1;
  int N = 4;

  std::vector<IndexLabel> labels() const;
};

struct FamilyParams {
  // Upper bound on stored entries; sets the per-axis window size.
  std::size_t budget = 16384;
  // Keep probability for sparse-gaussian.
  double density = 0.1;
};

// Sweep families:
//   dense-gaussian    complex Gaussian entries on a window S^rank
//   sparse-gaussian   same, each entry kept with probability `density`
//   diagonal-pairing  supported on n_{j1} = n_{j2} (n_{j1} = n_{a1} when k = 1)
//   rank-one          outer product of unit-norm complex Gaussian vectors
//   random-sign       +-1 entries on a window S^rank
// plus two k = 1 coefficient-series tensors over the whole box:
//   diagonal-series   h_{n0 a b} = [n0 = a = b]  (A_n = e_n e_n^T)
//   identity-series   h_{n0 a b} = [n0 = 0][a = b]  (A_0 = I)
// All axes draw from one common window S of lattice points so J factors
// collide. Output is a deterministic function of (name, shape, params, seed).
// Throws ConfigError for an unknown name.
Tensor generate_family(const std::string& name, const FamilyShape& shape, const FamilyParams& params,
                       std::uint64_t seed);

const std::vector<std::string>& sweep_family_names();

// Window S: min(box size, window_size) distinct lattice points of the l1 box,
// chosen by seed, returned in lexicographic order.
std::vector<LatticePoint> family_window(int d, int N, std::size_t window_size, std::uint64_t seed);

// Sparse random tensor with the given labels: each index of the l1 box
// product is kept with probability `density`, values complex Gaussian.
Tensor random_sparse_tensor(std::vector<IndexLabel> labels, int d, int N, double density, std::uint64_t seed);

}  // namespace randten
