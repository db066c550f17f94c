#include "randten/norms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include <Eigen/Eigenvalues>

#include "randten/errors.hpp"

namespace randten {

std::string to_string(NormMethod method) {
  return method == NormMethod::ExactSvd ? "exact_svd" : "power_iteration";
}

namespace {

std::vector<std::size_t> positions_of(const Tensor& h, const std::vector<IndexLabel>& side) {
  std::vector<std::size_t> pos;
  pos.reserve(side.size());
  for (const auto& label : side) pos.push_back(h.label_position(label.name));
  std::sort(pos.begin(), pos.end());
  return pos;
}

FlatIndex gather(const FlatIndex& index, std::span<const std::size_t> positions, int d) {
  FlatIndex key;
  key.reserve(positions.size() * static_cast<std::size_t>(d));
  for (std::size_t p : positions) {
    auto first = index.begin() + static_cast<std::ptrdiff_t>(p * static_cast<std::size_t>(d));
    key.insert(key.end(), first, first + d);
  }
  return key;
}

void check_covers(const Tensor& h, const Partition& p) {
  std::set<std::string> names;
  for (const auto& l : p.x_side)
    if (!names.insert(l.name).second) throw LabelError("label '" + l.name + "' repeated in partition");
  for (const auto& l : p.y_side)
    if (!names.insert(l.name).second) throw LabelError("label '" + l.name + "' on both sides of partition");
  if (names.size() != h.rank()) throw LabelError("partition does not cover the tensor's labels");
  for (const auto& l : h.labels())
    if (!names.count(l.name)) throw LabelError("partition is missing label '" + l.name + "'");
}

std::map<FlatIndex, Eigen::Index> enumerate_keys(const std::set<FlatIndex>& keys) {
  std::map<FlatIndex, Eigen::Index> out;
  Eigen::Index i = 0;
  for (const auto& k : keys) out.emplace(k, i++);
  return out;
}

}  // namespace

Matricization matricize(const Tensor& h, const Partition& p, std::size_t dense_cap) {
  check_covers(h, p);
  const auto x_pos = positions_of(h, p.x_side);
  const auto y_pos = positions_of(h, p.y_side);
  const int d = h.dim();

  std::set<FlatIndex> row_keys, col_keys;
  for (const auto& [index, value] : h.entries()) {
    row_keys.insert(gather(index, y_pos, d));
    col_keys.insert(gather(index, x_pos, d));
  }
  if (!row_keys.empty() && col_keys.size() > dense_cap / row_keys.size())
    throw CapExceededError("matricization " + std::to_string(row_keys.size()) + "x" +
                           std::to_string(col_keys.size()) + " exceeds dense cap " + std::to_string(dense_cap));

  const auto row_of = enumerate_keys(row_keys);
  const auto col_of = enumerate_keys(col_keys);
  Matricization m;
  m.rows.assign(row_keys.begin(), row_keys.end());
  m.cols.assign(col_keys.begin(), col_keys.end());
  m.matrix = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(m.rows.size()), static_cast<Eigen::Index>(m.cols.size()));
  for (const auto& [index, value] : h.entries())
    m.matrix(row_of.at(gather(index, y_pos, d)), col_of.at(gather(index, x_pos, d))) = value;
  return m;
}

NormResult operator_norm(const Eigen::MatrixXcd& m, const NormOptions& options) {
  if (!(options.tol > 0)) throw Error("operator_norm tolerance must be positive");
  NormResult result;
  if (m.size() == 0 || m.isZero(0.0)) return result;

  const auto small_side = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
  if (small_side <= options.exact_threshold) {
    // Top eigenvalue of the Gram matrix on the smaller side is sigma_max^2.
    const Eigen::MatrixXcd gram = m.cols() <= m.rows() ? Eigen::MatrixXcd(m.adjoint() * m)
                                                      : Eigen::MatrixXcd(m * m.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(gram, Eigen::EigenvaluesOnly);
    result.value = std::sqrt(std::max(0.0, eig.eigenvalues().maxCoeff()));
    return result;
  }

  result.method = NormMethod::PowerIteration;
  std::mt19937_64 rng(0x5eed5eedULL);
  std::normal_distribution<double> normal;
  Eigen::VectorXcd v(m.cols());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = Complex(normal(rng), normal(rng));
  v.normalize();

  double sigma = 0.0;
  result.converged = false;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Eigen::VectorXcd w = m * v;
    const double next = w.norm();
    Eigen::VectorXcd u = m.adjoint() * w;
    const double u_norm = u.norm();
    result.iterations = it;
    if (u_norm == 0.0) {
      sigma = next;
      result.residual = 0.0;
      result.converged = true;
      break;
    }
    result.residual = std::abs(next - sigma) / next;
    sigma = next;
    v = u / u_norm;
    if (it > 1 && result.residual <= options.tol) {
      result.converged = true;
      break;
    }
  }
  result.value = sigma;
  if (!result.converged && options.throw_on_nonconvergence)
    throw ConvergenceError("power iteration did not reach tol " + std::to_string(options.tol) + " in " +
                           std::to_string(options.max_iterations) + " iterations");
  return result;
}

NormResult operator_norm(const Matricization& m, const NormOptions& options) {
  return operator_norm(m.matrix, options);
}

NormResult tensor_norm(const Tensor& h, const Partition& p, const NormOptions& options) {
  return operator_norm(matricize(h, p, options.dense_cap), options);
}

Partition split_labels(const Tensor& h, std::span<const std::string> x_names) {
  for (const auto& name : x_names) (void)h.label_position(name);
  Partition p;
  for (const auto& label : h.labels()) {
    const bool in_x = std::find(x_names.begin(), x_names.end(), label.name) != x_names.end();
    (in_x ? p.x_side : p.y_side).push_back(label);
  }
  return p;
}

Partition split_labels(const Tensor& h, std::initializer_list<std::string> x_names) {
  return split_labels(h, std::span<const std::string>(x_names.begin(), x_names.size()));
}

Tensor merge(const Tensor& h1, const Tensor& h2, std::span<const std::string> shared) {
  if (h1.dim() != h2.dim()) throw LabelError("merge requires equal lattice dimensions");
  const int d = h1.dim();

  std::vector<std::size_t> shared1, shared2;
  for (const auto& name : shared) {
    if (!h1.has_label(name) || !h2.has_label(name))
      throw LabelError("shared label '" + name + "' must appear in both tensors");
    shared1.push_back(h1.label_position(name));
    shared2.push_back(h2.label_position(name));
  }
  auto is_shared = [&](const std::string& name) {
    return std::find(shared.begin(), shared.end(), name) != shared.end();
  };

  std::vector<IndexLabel> labels;
  std::vector<std::size_t> rest1, rest2;
  for (std::size_t i = 0; i < h1.rank(); ++i)
    if (!is_shared(h1.labels()[i].name)) {
      labels.push_back(h1.labels()[i]);
      rest1.push_back(i);
    }
  for (std::size_t i = 0; i < h2.rank(); ++i)
    if (!is_shared(h2.labels()[i].name)) {
      if (h1.has_label(h2.labels()[i].name))
        throw LabelError("label '" + h2.labels()[i].name + "' appears in both tensors but is not shared");
      labels.push_back(h2.labels()[i]);
      rest2.push_back(i);
    }

  std::map<FlatIndex, std::vector<std::pair<FlatIndex, Complex>>> by_shared;
  for (const auto& [index, value] : h2.entries())
    by_shared[gather(index, shared2, d)].emplace_back(gather(index, rest2, d), value);

  std::map<FlatIndex, Complex> acc;
  for (const auto& [index, value] : h1.entries()) {
    auto it = by_shared.find(gather(index, shared1, d));
    if (it == by_shared.end()) continue;
    FlatIndex head = gather(index, rest1, d);
    for (const auto& [tail, value2] : it->second) {
      FlatIndex out = head;
      out.insert(out.end(), tail.begin(), tail.end());
      acc[std::move(out)] += value * value2;
    }
  }
  std::vector<TensorEntry> entries;
  entries.reserve(acc.size());
  for (auto& [index, value] : acc) entries.push_back({index, value});
  return make_tensor(std::move(labels), d, std::max(h1.truncation(), h2.truncation()), entries);
}

}  // namespace randten
