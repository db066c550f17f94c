#include "randten/tensor.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

#include "randten/errors.hpp"

namespace randten {

std::string to_string(LabelGroup group) {
  switch (group) {
    case LabelGroup::J: return "J";
    case LabelGroup::A: return "A";
    case LabelGroup::B: return "B";
  }
  return "?";
}

LabelGroup label_group_from_string(const std::string& text) {
  if (text == "J") return LabelGroup::J;
  if (text == "A") return LabelGroup::A;
  if (text == "B") return LabelGroup::B;
  throw LabelError("unknown label group '" + text + "'");
}

long LatticePoint::l1() const {
  long total = 0;
  for (int c : coords) total += std::labs(c);
  return total;
}

std::size_t Tensor::label_position(const std::string& name) const {
  for (std::size_t i = 0; i < labels_.size(); ++i)
    if (labels_[i].name == name) return i;
  throw LabelError("tensor has no label '" + name + "'");
}

bool Tensor::has_label(const std::string& name) const {
  return std::any_of(labels_.begin(), labels_.end(), [&](const IndexLabel& l) { return l.name == name; });
}

Complex Tensor::at(const FlatIndex& index) const {
  auto it = entries_.find(index);
  return it == entries_.end() ? Complex{} : it->second;
}

LatticePoint Tensor::point(const FlatIndex& index, std::size_t label_pos) const {
  auto first = index.begin() + static_cast<std::ptrdiff_t>(label_pos * static_cast<std::size_t>(dim_));
  return LatticePoint(std::vector<int>(first, first + dim_));
}

Tensor Tensor::scaled(Complex factor) const {
  std::vector<TensorEntry> scaled_entries;
  scaled_entries.reserve(entries_.size());
  for (const auto& [index, value] : entries_) scaled_entries.push_back({index, value * factor});
  return make_tensor(labels_, dim_, truncation_, scaled_entries);
}

Tensor make_tensor(std::vector<IndexLabel> labels, int d, int N, std::span<const TensorEntry> entries) {
  if (d < 1) throw LabelError("lattice dimension must be >= 1");
  if (N < 0) throw SupportBoundError("truncation N must be >= 0");
  std::set<std::string> seen;
  for (const auto& label : labels)
    if (!seen.insert(label.name).second) throw LabelError("duplicate label '" + label.name + "'");

  const std::size_t width = labels.size() * static_cast<std::size_t>(d);
  Tensor h;
  h.labels_ = std::move(labels);
  h.dim_ = d;
  h.truncation_ = N;
  for (const auto& entry : entries) {
    if (entry.index.size() != width)
      throw LabelError("entry index has " + std::to_string(entry.index.size()) + " coordinates, expected " +
                       std::to_string(width));
    for (std::size_t l = 0; l < h.labels_.size(); ++l) {
      long norm = 0;
      for (int c = 0; c < d; ++c) norm += std::labs(entry.index[l * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)]);
      if (norm > N)
        throw SupportBoundError("entry exceeds l1 bound N=" + std::to_string(N) + " on label '" +
                                h.labels_[l].name + "'");
    }
    h.entries_[entry.index] += entry.value;
  }
  std::erase_if(h.entries_, [](const auto& kv) { return kv.second == Complex{}; });
  return h;
}

Tensor conjugate(const Tensor& h) {
  Tensor out = h;
  for (auto& [index, value] : out.entries_) value = std::conj(value);
  return out;
}

std::string to_string(const Partition& p) {
  auto side = [](const std::vector<IndexLabel>& labels) {
    std::string s = "[";
    for (std::size_t i = 0; i < labels.size(); ++i) s += (i ? " " : "") + labels[i].name;
    return s + "]";
  };
  return side(p.x_side) + "->" + side(p.y_side);
}

std::vector<Partition> enumerate_partitions(std::span<const IndexLabel> labels, std::size_t cap) {
  if (labels.size() > cap)
    throw CapExceededError("partition enumeration over " + std::to_string(labels.size()) +
                           " labels exceeds cap " + std::to_string(cap));
  const std::size_t count = std::size_t{1} << labels.size();
  std::vector<Partition> out;
  out.reserve(count);
  for (std::size_t mask = 0; mask < count; ++mask) {
    Partition p;
    for (std::size_t b = 0; b < labels.size(); ++b)
      ((mask >> b) & 1U ? p.y_side : p.x_side).push_back(labels[b]);
    out.push_back(std::move(p));
  }
  return out;
}

namespace {

void box_recurse(int d, int budget, std::vector<int>& prefix, std::vector<LatticePoint>& out) {
  if (static_cast<int>(prefix.size()) == d) {
    out.emplace_back(prefix);
    return;
  }
  for (int c = -budget; c <= budget; ++c) {
    prefix.push_back(c);
    box_recurse(d, budget - std::abs(c), prefix, out);
    prefix.pop_back();
  }
}

}  // namespace

std::vector<LatticePoint> lattice_box(int d, int N) {
  std::vector<LatticePoint> out;
  std::vector<int> prefix;
  if (d >= 1 && N >= 0) box_recurse(d, N, prefix, out);
  return out;
}

nlohmann::json to_json(const Tensor& h) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& l : h.labels()) labels.push_back({{"name", l.name}, {"group", to_string(l.group)}});
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& [index, value] : h.entries()) entries.push_back({index, value.real(), value.imag()});
  return {{"labels", labels}, {"d", h.dim()}, {"N", h.truncation()}, {"entries", entries}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
  std::vector<IndexLabel> labels;
  for (const auto& l : j.at("labels")) {
    if (l.is_string())
      labels.push_back({l.get<std::string>(), LabelGroup::A});
    else
      labels.push_back({l.at("name").get<std::string>(), label_group_from_string(l.at("group").get<std::string>())});
  }
  std::vector<TensorEntry> entries;
  for (const auto& e : j.at("entries"))
    entries.push_back({e.at(0).get<FlatIndex>(), Complex(e.at(1).get<double>(), e.at(2).get<double>())});
  return make_tensor(std::move(labels), j.at("d").get<int>(), j.at("N").get<int>(), entries);
}

}  // namespace randten
