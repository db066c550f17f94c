#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "randten/tensor.hpp"

namespace randten {

// Dense view of a tensor as an operator from l2(n_X) to l2(n_Y). Rows are the
// Y-side sub-indices and columns the X-side sub-indices that occur in the
// support, both sorted lexicographically in tensor label order.
struct Matricization {
  std::vector<FlatIndex> rows;
  std::vector<FlatIndex> cols;
  Eigen::MatrixXcd matrix;
};

enum class NormMethod { ExactSvd, PowerIteration };

std::string to_string(NormMethod method);

struct NormResult {
  double value = 0.0;
  NormMethod method = NormMethod::ExactSvd;
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

struct NormOptions {
  double tol = 1e-10;
  // Direct decomposition when min(rows, cols) is at most this.
  std::size_t exact_threshold = 512;
  int max_iterations = 10000;
  std::size_t dense_cap = std::size_t{1} << 22;  // max rows * cols held densely
  // Throw ConvergenceError instead of returning converged == false.
  bool throw_on_nonconvergence = false;
};

// Throws LabelError unless p splits exactly the labels of h, and
// CapExceededError when rows * cols exceeds dense_cap.
Matricization matricize(const Tensor& h, const Partition& p, std::size_t dense_cap = std::size_t{1} << 22);

NormResult operator_norm(const Eigen::MatrixXcd& m, const NormOptions& options = {});
NormResult operator_norm(const Matricization& m, const NormOptions& options = {});

// ||h||_{n_X -> n_Y}.
NormResult tensor_norm(const Tensor& h, const Partition& p, const NormOptions& options = {});

// Partition of h's labels with the named labels on the input side and the rest
// on the output side.
Partition split_labels(const Tensor& h, std::initializer_list<std::string> x_names);
Partition split_labels(const Tensor& h, std::span<const std::string> x_names);

// Contraction sum_{n_C} h1 h2 over the shared labels C. The result carries the
// non-shared labels of h1 followed by those of h2, and truncation max(N1, N2).
Tensor merge(const Tensor& h1, const Tensor& h2, std::span<const std::string> shared);

inline Tensor merge(const Tensor& h1, const Tensor& h2, std::initializer_list<std::string> shared) {
  return merge(h1, h2, std::span<const std::string>(shared.begin(), shared.size()));
}

}  // namespace randten
