#include <gtest/gtest.h>

#include "randten/errors.hpp"
#include "randten/tensor.hpp"

using namespace randten;

namespace {

Tensor identity_tensor(int N) {
  std::vector<TensorEntry> entries;
  for (int n = -N; n <= N; ++n) entries.push_back({{n, n}, 1.0});
  return make_tensor({a_label(1), b_label(1)}, 1, N, entries);
}

}  // namespace

TEST(MakeTensor, DropsZeros) {
  const Tensor h = make_tensor({a_label(1)}, 1, 2, {{{0}, 1.0}, {{1}, 0.0}});
  ASSERT_EQ(h.nnz(), 1u);
  EXPECT_EQ(h.at({0}), Complex(1.0));
  EXPECT_EQ(h.at({1}), Complex(0.0));
}

TEST(MakeTensor, SupportBound) {
  EXPECT_THROW(make_tensor({a_label(1)}, 1, 2, {{{3}, 1.0}}), SupportBoundError);
  // l1, not sup norm: (1, 2) has |n|_1 = 3.
  EXPECT_THROW(make_tensor({a_label(1)}, 2, 2, {{{1, 2}, 1.0}}), SupportBoundError);
  EXPECT_NO_THROW(make_tensor({a_label(1)}, 2, 3, {{{1, 2}, 1.0}}));
}

TEST(MakeTensor, IdentityTensor) {
  const Tensor h = identity_tensor(1);
  EXPECT_EQ(h.nnz(), 3u);
  for (int a = -1; a <= 1; ++a)
    for (int b = -1; b <= 1; ++b) EXPECT_EQ(h.at({a, b}), Complex(a == b ? 1.0 : 0.0));
}

TEST(MakeTensor, SumsRepeatedIndices) {
  const Tensor h = make_tensor({a_label(1)}, 1, 1, {{{0}, 1.0}, {{0}, Complex(0, 2)}, {{1}, 1.0}, {{1}, -1.0}});
  EXPECT_EQ(h.nnz(), 1u);
  EXPECT_EQ(h.at({0}), Complex(1, 2));
}

TEST(MakeTensor, RejectsMalformedInput) {
  EXPECT_THROW(make_tensor({a_label(1), a_label(1)}, 1, 1, {}), LabelError);
  EXPECT_THROW(make_tensor({a_label(1), b_label(1)}, 1, 1, {{{0}, 1.0}}), LabelError);
  EXPECT_THROW(identity_tensor(1).label_position("zz"), LabelError);
}

TEST(Conjugate, Definition) {
  const Tensor h = make_tensor({a_label(1)}, 1, 1, {{{-1}, Complex(1, 2)}, {{1}, Complex(0, -3)}});
  const Tensor c = conjugate(h);
  EXPECT_EQ(c.at({-1}), Complex(1, -2));
  EXPECT_EQ(c.at({1}), Complex(0, 3));
  EXPECT_EQ(conjugate(c), h);
  EXPECT_EQ(conjugate(identity_tensor(2)), identity_tensor(2));
}

TEST(Partitions, Counts) {
  const std::vector<IndexLabel> one{j_label(1)};
  const auto p1 = enumerate_partitions(one);
  ASSERT_EQ(p1.size(), 2u);
  EXPECT_EQ(p1[0], (Partition{{j_label(1)}, {}}));
  EXPECT_EQ(p1[1], (Partition{{}, {j_label(1)}}));

  const std::vector<IndexLabel> two{j_label(1), j_label(2)};
  EXPECT_EQ(enumerate_partitions(two).size(), 4u);

  const auto p0 = enumerate_partitions(std::vector<IndexLabel>{});
  ASSERT_EQ(p0.size(), 1u);
  EXPECT_TRUE(p0[0].x_side.empty() && p0[0].y_side.empty());
}

TEST(Partitions, CapExceeded) {
  std::vector<IndexLabel> many;
  for (int i = 1; i <= 5; ++i) many.push_back(j_label(i));
  EXPECT_EQ(enumerate_partitions(many, 5).size(), 32u);
  EXPECT_THROW(enumerate_partitions(many, 4), CapExceededError);
}

TEST(Partitions, ToString) {
  EXPECT_EQ(to_string(Partition{{a_label(1), j_label(1)}, {b_label(1)}}), "[a1 j1]->[b1]");
}

TEST(LatticeBox, Sizes) {
  EXPECT_EQ(lattice_box(1, 4).size(), 9u);
  EXPECT_EQ(lattice_box(2, 1).size(), 5u);
  EXPECT_EQ(lattice_box(2, 2).size(), 13u);
  EXPECT_EQ(lattice_box(3, 1).size(), 7u);
  const auto box = lattice_box(2, 2);
  EXPECT_TRUE(std::is_sorted(box.begin(), box.end()));
  for (const auto& n : box) EXPECT_LE(n.l1(), 2);
}

TEST(TensorJson, RoundTrip) {
  const Tensor h = make_tensor({j_label(1), a_label(1)}, 2, 2, {{{1, 0, -1, 1}, Complex(0.5, -0.25)}, {{0, 0, 0, 0}, 3.0}});
  const Tensor back = tensor_from_json(to_json(h));
  EXPECT_EQ(back, h);
  EXPECT_EQ(back.labels()[0].group, LabelGroup::J);
}
