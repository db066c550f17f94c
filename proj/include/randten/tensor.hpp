#pragma once

#include <complex>
#include <compare>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace randten {

using Complex = std::complex<double>;

enum class LabelGroup { J, A, B };

std::string to_string(LabelGroup group);
LabelGroup label_group_from_string(const std::string& text);

struct IndexLabel {
  std::string name;
  LabelGroup group = LabelGroup::A;

  friend bool operator==(const IndexLabel&, const IndexLabel&) = default;
};

inline IndexLabel j_label(int i) { return {"j" + std::to_string(i), LabelGroup::J}; }
inline IndexLabel a_label(int i) { return {"a" + std::to_string(i), LabelGroup::A}; }
inline IndexLabel b_label(int i) { return {"b" + std::to_string(i), LabelGroup::B}; }

struct LatticePoint {
  std::vector<int> coords;

  LatticePoint() = default;
  LatticePoint(std::initializer_list<int> c) : coords(c) {}
  explicit LatticePoint(std::vector<int> c) : coords(std::move(c)) {}

  std::size_t dim() const { return coords.size(); }
  long l1() const;

  friend auto operator<=>(const LatticePoint&, const LatticePoint&) = default;
  friend bool operator==(const LatticePoint&, const LatticePoint&) = default;
};

// A multi-index stored flat: label order first, then coordinate order, so
// label i occupies [i*d, (i+1)*d).
using FlatIndex = std::vector<int>;

struct TensorEntry {
  FlatIndex index;
  Complex value;
};

// Sparse complex tensor over a truncated Z^d lattice. Immutable once built;
// every stored index satisfies |n_label|_1 <= N and no stored value is zero.
class Tensor {
 public:
  using Storage = std::map<FlatIndex, Complex>;

  Tensor() = default;

  const std::vector<IndexLabel>& labels() const { return labels_; }
  std::size_t rank() const { return labels_.size(); }
  int dim() const { return dim_; }
  int truncation() const { return truncation_; }
  const Storage& entries() const { return entries_; }
  std::size_t nnz() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Position of a label by name; throws LabelError when absent.
  std::size_t label_position(const std::string& name) const;
  bool has_label(const std::string& name) const;

  // Value at a flat index (zero when not stored).
  Complex at(const FlatIndex& index) const;

  LatticePoint point(const FlatIndex& index, std::size_t label_pos) const;

  Tensor scaled(Complex factor) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  friend Tensor make_tensor(std::vector<IndexLabel>, int, int, std::span<const TensorEntry>);
  friend Tensor conjugate(const Tensor&);

  std::vector<IndexLabel> labels_;
  int dim_ = 1;
  int truncation_ = 0;
  Storage entries_;
};

// Builds a canonical tensor. Repeated indices are summed before zeros are
// dropped. Throws SupportBoundError for entries outside the l1 box and
// LabelError for duplicate label names or malformed indices.
Tensor make_tensor(std::vector<IndexLabel> labels, int d, int N, std::span<const TensorEntry> entries);

inline Tensor make_tensor(std::vector<IndexLabel> labels, int d, int N,
                          std::initializer_list<TensorEntry> entries) {
  return make_tensor(std::move(labels), d, N, std::span<const TensorEntry>(entries.begin(), entries.size()));
}

Tensor conjugate(const Tensor& h);

struct Partition {
  std::vector<IndexLabel> x_side;  // input axes
  std::vector<IndexLabel> y_side;  // output axes

  friend bool operator==(const Partition&, const Partition&) = default;
};

std::string to_string(const Partition& p);

inline constexpr std::size_t kDefaultPartitionCap = 12;

// All 2^|labels| ordered splits. Partition i places label b in x_side iff
// bit b of i is clear, so index 0 is (labels, {}) and the last is ({}, labels).
std::vector<Partition> enumerate_partitions(std::span<const IndexLabel> labels,
                                            std::size_t cap = kDefaultPartitionCap);

// Every lattice point of Z^d with l1 norm <= N, lexicographic order.
std::vector<LatticePoint> lattice_box(int d, int N);

nlohmann::json to_json(const Tensor& h);
Tensor tensor_from_json(const nlohmann::json& j);

}  // namespace randten
